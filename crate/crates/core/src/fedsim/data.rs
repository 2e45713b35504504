//! Synthetic non-IID classification data: Gaussian clusters per class,
//! with each SN restricted to a small label support.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::FlConfig;
use crate::rng::{RngHub, StreamKind};

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn label_histogram(&self, classes: usize) -> Vec<usize> {
        let mut h = vec![0; classes];
        for &y in &self.ys {
            h[y] += 1;
        }
        h
    }
}

/// Per-SN training shards plus a shared IID test set.
#[derive(Debug, Clone)]
pub struct FlData {
    pub per_sn: Vec<Dataset>,
    pub test: Dataset,
    pub class_means: Vec<Vec<f64>>,
}

impl FlData {
    pub fn sizes(&self) -> Vec<f64> {
        self.per_sn.iter().map(|d| d.len() as f64).collect()
    }
}

fn sample_point<R: Rng + ?Sized>(mean: &[f64], rng: &mut R) -> Vec<f64> {
    let n = Normal::new(0.0, 1.0).unwrap();
    mean.iter().map(|&m| m + n.sample(rng)).collect()
}

/// Draws the task: class means at separation `cluster_sep`, one shard
/// per SN covering `labels_per_sn` classes, sizes uniform in the
/// configured range, and an IID test set over all classes.
pub fn make_noniid_data(cfg: &FlConfig, n_sns: usize, hub: &RngHub) -> FlData {
    assert!(
        cfg.task.classes >= cfg.labels_per_sn && cfg.labels_per_sn >= 1,
        "labels_per_sn must be in [1, classes]"
    );
    let mut rng = hub.stream(StreamKind::FlData, 0);
    let d = cfg.task.feature_dim;
    let scale = cfg.task.cluster_sep / (d as f64).sqrt();
    let n = Normal::new(0.0, scale).unwrap();
    let class_means: Vec<Vec<f64>> =
        (0..cfg.task.classes).map(|_| (0..d).map(|_| n.sample(&mut rng)).collect()).collect();

    let all_classes: Vec<usize> = (0..cfg.task.classes).collect();
    let [lo, hi] = cfg.dataset_size_range;
    let per_sn = (0..n_sns)
        .map(|_| {
            let mut support = all_classes.clone();
            support.shuffle(&mut rng);
            support.truncate(cfg.labels_per_sn);
            let size = rng.random_range(lo..=hi);
            let mut ds = Dataset::default();
            for _ in 0..size {
                let c = support[rng.random_range(0..support.len())];
                ds.xs.push(sample_point(&class_means[c], &mut rng));
                ds.ys.push(c);
            }
            ds
        })
        .collect();

    let mut test = Dataset::default();
    for _ in 0..cfg.task.test_samples {
        let c = rng.random_range(0..cfg.task.classes);
        test.xs.push(sample_point(&class_means[c], &mut rng));
        test.ys.push(c);
    }

    FlData { per_sn, test, class_means }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(labels_per_sn: usize) -> FlConfig {
        FlConfig { labels_per_sn, dataset_size_range: [50, 80], ..Default::default() }
    }

    #[test]
    fn shards_respect_label_support_and_sizes() {
        let c = cfg(2);
        let data = make_noniid_data(&c, 8, &RngHub::new(3));
        assert_eq!(data.per_sn.len(), 8);
        for ds in &data.per_sn {
            assert!(ds.len() >= 50 && ds.len() <= 80);
            let nonzero = ds.label_histogram(c.task.classes).iter().filter(|&&n| n > 0).count();
            assert_eq!(nonzero, 2);
        }
    }

    #[test]
    fn full_support_is_iid_like() {
        let c = cfg(10);
        let data = make_noniid_data(&c, 4, &RngHub::new(3));
        for ds in &data.per_sn {
            let nonzero = ds.label_histogram(10).iter().filter(|&&n| n > 0).count();
            assert!(nonzero >= 8, "with 50+ draws over 10 classes most bins fill");
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let c = cfg(2);
        let a = make_noniid_data(&c, 5, &RngHub::new(11));
        let b = make_noniid_data(&c, 5, &RngHub::new(11));
        assert_eq!(a.per_sn[3].xs, b.per_sn[3].xs);
        assert_eq!(a.test.ys, b.test.ys);
        let c2 = make_noniid_data(&c, 5, &RngHub::new(12));
        assert_ne!(a.test.xs, c2.test.xs);
    }
}
