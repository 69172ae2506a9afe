use std::fmt::Write as _;

use serde::Serialize;

use super::SimError;
use crate::model::{evaluate, model_difference, LabeledSample, ModelParams};

/// Accuracy of every node on the shared test set plus the per-layer model
/// difference across all nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsFrame {
    pub tick: u64,
    pub accuracy: Vec<f64>,
    pub difference: Vec<f64>,
}

pub fn collect_metrics(
    models: &[&ModelParams],
    test_set: &[LabeledSample],
    tick: u64,
) -> Result<MetricsFrame, SimError> {
    let accuracy = models
        .iter()
        .map(|m| evaluate(m, test_set))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MetricsFrame {
        tick,
        accuracy,
        difference: model_difference(models)?,
    })
}

/// One row per (frame, node): `tick,node_id,accuracy,diff_<layer>...`.
/// The difference columns repeat the frame-wide vector on every node row.
pub fn write_metrics_csv(frames: &[MetricsFrame], layer_names: &[&str]) -> String {
    let mut out = String::from("tick,node_id,accuracy");
    for name in layer_names {
        write!(out, ",diff_{name}").unwrap();
    }
    out.push('\n');
    for f in frames {
        for (node, acc) in f.accuracy.iter().enumerate() {
            write!(out, "{},{node},{acc}", f.tick).unwrap();
            for d in &f.difference {
                write!(out, ",{d}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

/// Elementwise mean over runs with aligned frames.
pub fn mean_series(runs: &[&[MetricsFrame]]) -> Vec<MetricsFrame> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    let n = runs.len() as f64;
    first
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let mut accuracy = vec![0.0; f.accuracy.len()];
            let mut difference = vec![0.0; f.difference.len()];
            for run in runs {
                for (a, v) in accuracy.iter_mut().zip(&run[i].accuracy) {
                    *a += v / n;
                }
                for (d, v) in difference.iter_mut().zip(&run[i].difference) {
                    *d += v / n;
                }
            }
            MetricsFrame {
                tick: f.tick,
                accuracy,
                difference,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_model, Architecture};

    fn test_set() -> Vec<LabeledSample> {
        (0..500)
            .map(|i| {
                let label = i % 10;
                let mut f = vec![0.0; 8];
                f[label % 8] = 4.0;
                f[(label + 3) % 8] += 1.0 + (i as f64 * 0.37).sin();
                LabeledSample::new(f, label)
            })
            .collect()
    }

    #[test]
    fn identical_models_have_zero_difference() {
        let d = Architecture::mlp(8, 16, 10).descriptor();
        let models: Vec<_> = (0..4).map(|_| init_model(&d, 3).unwrap()).collect();
        let refs: Vec<_> = models.iter().collect();
        let f = collect_metrics(&refs, &test_set(), 0).unwrap();
        assert_eq!(f.difference, vec![0.0; 4]);
        assert!(f.accuracy.iter().all(|a| (0.0..=1.0).contains(a)));
    }

    #[test]
    fn random_models_sit_near_chance() {
        let d = Architecture::mlp(8, 16, 10).descriptor();
        for seed in 0..5 {
            let m = init_model(&d, seed).unwrap();
            let f = collect_metrics(&[&m, &m], &test_set(), 0).unwrap();
            assert!((0.02..=0.25).contains(&f.accuracy[0]), "{}", f.accuracy[0]);
        }
    }

    #[test]
    fn csv_and_mean() {
        let a = MetricsFrame { tick: 10, accuracy: vec![0.5, 1.0], difference: vec![2.0] };
        let b = MetricsFrame { tick: 10, accuracy: vec![0.25, 0.0], difference: vec![4.0] };
        let csv = write_metrics_csv(std::slice::from_ref(&a), &["w"]);
        assert_eq!(csv, "tick,node_id,accuracy,diff_w\n10,0,0.5,2\n10,1,1,2\n");
        let m = mean_series(&[&[a][..], &[b][..]]);
        assert_eq!(m[0].accuracy, vec![0.375, 0.5]);
        assert_eq!(m[0].difference, vec![3.0]);
    }
}
