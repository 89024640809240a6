use rand::seq::SliceRandom;

use super::{DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::seed;

/// Partitions `0..labels.len()` into groups with the requested fractions,
/// separately per class. Each class is shuffled with a seeded RNG and cut at
/// rounded cumulative boundaries, so per-class group sizes are within one
/// sample of the exact proportion.
pub fn stratified_partition(labels: &[usize], fractions: &[f64], seed_value: u64) -> Result<Vec<Vec<usize>>> {
    if fractions.is_empty() || fractions.iter().any(|&f| !(0.0..=1.0).contains(&f)) {
        return Err(Error::invalid("split fractions must lie in [0, 1]"));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("split fractions sum to {total}, not 1")));
    }
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut groups = vec![Vec::new(); fractions.len()];
    for class in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let mut rng = seed::rng(seed::derive(seed_value, [class as u64]));
        members.shuffle(&mut rng);
        let m = members.len() as f64;
        let mut start = 0;
        let mut cumulative = 0.0;
        for (g, &f) in fractions.iter().enumerate() {
            cumulative += f;
            let end = if g + 1 == fractions.len() {
                members.len()
            } else {
                ((cumulative * m).round() as usize).min(members.len())
            };
            groups[g].extend_from_slice(&members[start..end.max(start)]);
            start = end.max(start);
        }
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    Ok(groups)
}

/// Assigns a split tag to every sample, stratified by class.
pub fn split(manifest: &DatasetManifest, fractions: &[(Split, f64)], seed_value: u64) -> Result<DatasetManifest> {
    let fr: Vec<f64> = fractions.iter().map(|&(_, f)| f).collect();
    let groups = stratified_partition(&manifest.labels(), &fr, seed_value)?;
    let mut out = manifest.clone();
    for ((tag, _), members) in fractions.iter().zip(groups) {
        for i in members {
            out.splits[i] = Some(*tag);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> Vec<usize> {
        (0..103).map(|i| if i < 50 { 0 } else if i < 83 { 1 } else { 2 }).collect()
    }

    #[test]
    fn single_fraction_takes_everything() {
        let g = stratified_partition(&labels(), &[1.0], 3).unwrap();
        assert_eq!(g[0], (0..103).collect::<Vec<_>>());
    }

    #[test]
    fn proportions_within_one_sample_per_class() {
        let labels = labels();
        let fr = [0.6, 0.2, 0.2];
        let g = stratified_partition(&labels, &fr, 9).unwrap();
        let counts = [50.0, 33.0, 20.0];
        for (gi, group) in g.iter().enumerate() {
            for (c, &m) in counts.iter().enumerate() {
                let got = group.iter().filter(|&&i| labels[i] == c).count() as f64;
                assert!((got - fr[gi] * m).abs() <= 1.0, "group {gi} class {c}: {got}");
            }
        }
        let mut all: Vec<usize> = g.concat();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());
    }

    #[test]
    fn seeded_assignment_is_reproducible() {
        let a = stratified_partition(&labels(), &[0.8, 0.2], 5).unwrap();
        let b = stratified_partition(&labels(), &[0.8, 0.2], 5).unwrap();
        let c = stratified_partition(&labels(), &[0.8, 0.2], 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn bad_fractions_rejected() {
        assert!(stratified_partition(&labels(), &[0.5, 0.4], 1).is_err());
        assert!(stratified_partition(&labels(), &[1.5, -0.5], 1).is_err());
    }
}
