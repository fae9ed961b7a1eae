//! Ordered set partitions of `0..n`.

/// Largest `n` for which every ordered partition is searched.
pub const MAX_EXHAUSTIVE_AGENTS: usize = 6;

/// Every ordered partition of `0..n` (Fubini many), each tier sorted,
/// ordered by number of tiers and then lexicographically.
pub fn ordered_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    for k in 1..=n {
        let mut labels = vec![0usize; n];
        loop {
            let mut tiers = vec![Vec::new(); k];
            for (i, &l) in labels.iter().enumerate() {
                tiers[l].push(i);
            }
            if tiers.iter().all(|t| !t.is_empty()) {
                out.push(tiers);
            }
            // next label vector in base k
            let Some(pos) = labels.iter().rposition(|&l| l + 1 < k) else {
                break;
            };
            labels[pos] += 1;
            labels[pos + 1..].fill(0);
        }
    }
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}
