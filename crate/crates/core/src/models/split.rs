use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::RoadTypeLabel;

/// Stratified split: within each label, `round(fraction * class size)` items go
/// to the held-out side. Returns sorted `(kept, held_out)` index lists.
pub fn stratified_split(labels: &[RoadTypeLabel], held_out_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = Vec::new();
    let mut held = Vec::new();
    for class in RoadTypeLabel::ALL {
        let mut idx: Vec<usize> = labels.iter().enumerate().filter(|(_, l)| **l == class).map(|(i, _)| i).collect();
        idx.shuffle(&mut rng);
        let k = (held_out_fraction * idx.len() as f64).round() as usize;
        held.extend_from_slice(&idx[..k]);
        kept.extend_from_slice(&idx[k..]);
    }
    kept.sort_unstable();
    held.sort_unstable();
    (kept, held)
}

#[cfg(test)]
mod tests {
    use super::*;
    use RoadTypeLabel::*;

    #[test]
    fn seventy_thirty_by_class() {
        let labels: Vec<_> = (0..100).map(|i| if i < 60 { Intersection } else { NonIntersection }).collect();
        let (tr, te) = stratified_split(&labels, 0.3, 1);
        assert_eq!(te.len(), 30);
        assert_eq!(te.iter().filter(|&&i| labels[i] == Intersection).count(), 18);
        assert_eq!(tr.len() + te.len(), 100);
        assert_eq!(stratified_split(&labels, 0.3, 1), (tr, te));
    }
}
