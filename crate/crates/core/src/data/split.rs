use super::rng::{KeyedRng, Purpose, StreamKey};
use crate::error::{Error, Result};

/// Index partition of a labelled set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Per-class validation quotas: `fraction · class_size`, floored, with the
/// leftover `round(fraction · total) − Σ floor` handed one each to the
/// classes with the largest fractional parts (ties to the lower label).
pub fn class_quotas(class_sizes: &[usize], fraction: f64) -> Vec<usize> {
    let total: usize = class_sizes.iter().sum();
    let target = (fraction * total as f64).round() as usize;
    let exact: Vec<f64> = class_sizes.iter().map(|&n| n as f64 * fraction).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..class_sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &c in order.iter().take(target.saturating_sub(assigned)) {
        quotas[c] += 1;
    }
    quotas
}

/// Holds out `fraction` of each class for validation.
///
/// Within each class (in label order) indices are shuffled by Fisher–Yates
/// driven by the `Split` stream of `seed`; the first `quota` shuffled indices
/// go to validation. Both outputs are returned in ascending index order.
pub fn stratified_split(labels: &[u8], num_classes: usize, fraction: f64, seed: u64) -> Result<Split> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "split fraction {fraction} outside [0, 1]"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class
            .get_mut(l as usize)
            .ok_or_else(|| Error::Data(format!("label {l} outside 0..{num_classes}")))?
            .push(i);
    }
    if let Some(empty) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::Data(format!("class {empty} has no samples")));
    }
    let sizes: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let quotas = class_quotas(&sizes, fraction);
    let mut rng = KeyedRng::new(StreamKey {
        seed,
        purpose: Purpose::Split,
        epoch: 0,
        index: 0,
    });
    let mut train = Vec::with_capacity(labels.len());
    let mut validation = Vec::new();
    for (members, &quota) in by_class.iter_mut().zip(&quotas) {
        for i in (1..members.len()).rev() {
            let j = rng.index(i + 1);
            members.swap(i, j);
        }
        validation.extend_from_slice(&members[..quota]);
        train.extend_from_slice(&members[quota..]);
    }
    train.sort_unstable();
    validation.sort_unstable();
    Ok(Split { train, validation })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mnist_class_sizes_give_12000() {
        let sizes = [5923, 6742, 5958, 6131, 5842, 5421, 5918, 6265, 5851, 5949];
        let q = class_quotas(&sizes, 0.2);
        assert_eq!(q.iter().sum::<usize>(), 12000);
        for (&n, &k) in sizes.iter().zip(&q) {
            assert!((k as f64 - 0.2 * n as f64).abs() <= 1.0);
        }
    }

    #[test]
    fn partition_is_disjoint_and_complete() {
        let labels: Vec<u8> = (0..1000).map(|i| (i * 7 % 10) as u8).collect();
        let s = stratified_split(&labels, 10, 0.2, 3).unwrap();
        assert_eq!(s.validation.len(), 200);
        let mut all: Vec<usize> = s.train.iter().chain(&s.validation).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn deterministic_under_seed() {
        let labels: Vec<u8> = (0..500).map(|i| (i % 10) as u8).collect();
        let a = stratified_split(&labels, 10, 0.2, 11).unwrap();
        let b = stratified_split(&labels, 10, 0.2, 11).unwrap();
        let c = stratified_split(&labels, 10, 0.2, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn empty_class_is_an_error() {
        let labels: Vec<u8> = (0..100).map(|i| (i % 9) as u8).collect();
        assert!(stratified_split(&labels, 10, 0.2, 0).is_err());
    }
}
