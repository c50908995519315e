//! Output bound estimation: sample, pick the extreme samples per output, and
//! push each of them further with a local minimization.
//!
//! The resulting bounds are attained by concrete witness inputs, so they can
//! only under-cover the true output range.

pub mod cache;

use thiserror::Error;
use tracing::{debug, warn};

use crate::onnx_runtime::{InferError, Network};
use crate::optimizer::{minimize, Objective, OptConfig, OptStatus};
use crate::sampler::{lhsmdu, InputBox, SampleSet};
pub use cache::{BoundsCache, CacheKey};

/// Samples drawn per input dimension.
pub const DEFAULT_SAMPLES_PER_INPUT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateConfig {
    pub samples_per_input: usize,
    pub optimizer: OptConfig,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            samples_per_input: DEFAULT_SAMPLES_PER_INPUT,
            optimizer: OptConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EstimateError {
    #[error("box has {box_dim} dimensions but the network takes {input_dim} inputs")]
    DimensionMismatch { box_dim: usize, input_dim: usize },
    #[error("samples_per_input must be positive")]
    NoSamples,
    #[error(transparent)]
    Infer(#[from] InferError),
}

/// A sample set together with the network output at every row.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedSamples {
    pub samples: SampleSet,
    pub outputs: Vec<Vec<f64>>,
}

pub fn evaluate_samples(net: &Network, samples: &SampleSet) -> Result<EvaluatedSamples, InferError> {
    #[cfg(feature = "parallel")]
    let outputs = {
        use rayon::prelude::*;
        samples
            .points
            .par_iter()
            .map(|x| net.infer(x))
            .collect::<Result<Vec<_>, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let outputs = samples
        .points
        .iter()
        .map(|x| net.infer(x))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvaluatedSamples {
        samples: samples.clone(),
        outputs,
    })
}

/// Extreme sampled values of one output and the rows attaining them.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputCandidates {
    pub argmin_point: Vec<f64>,
    pub min_value: f64,
    pub argmax_point: Vec<f64>,
    pub max_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub outputs: Vec<OutputCandidates>,
}

/// Per-output argmin/argmax over already evaluated samples; ties go to the
/// lowest row.
pub fn candidates_from(evaluated: &EvaluatedSamples) -> CandidateSet {
    let points = &evaluated.samples.points;
    let width = evaluated.outputs.first().map_or(0, Vec::len);
    let outputs = (0..width)
        .map(|j| {
            let (mut imin, mut imax) = (0, 0);
            for (row, y) in evaluated.outputs.iter().enumerate() {
                if y[j] < evaluated.outputs[imin][j] {
                    imin = row;
                }
                if y[j] > evaluated.outputs[imax][j] {
                    imax = row;
                }
            }
            OutputCandidates {
                argmin_point: points[imin].clone(),
                min_value: evaluated.outputs[imin][j],
                argmax_point: points[imax].clone(),
                max_value: evaluated.outputs[imax][j],
            }
        })
        .collect();
    CandidateSet { outputs }
}

/// Evaluates every sample and records the per-output extremes.
pub fn extract_optima(net: &Network, samples: &SampleSet) -> Result<CandidateSet, InferError> {
    assert!(!samples.is_empty(), "extract_optima needs at least one sample");
    Ok(candidates_from(&evaluate_samples(net, samples)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Fresh,
    Cache,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputBound {
    pub lo: f64,
    pub hi: f64,
    pub lo_witness: Vec<f64>,
    pub hi_witness: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputBounds {
    pub outputs: Vec<OutputBound>,
    pub provenance: Provenance,
}

impl OutputBounds {
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        self.outputs.iter().map(|b| (b.lo, b.hi)).collect()
    }
}

#[derive(Debug, Clone, Copy)]
enum Direction {
    Min,
    Max,
}

fn refine_one(
    net: &Network,
    bounds: &InputBox,
    start: &[f64],
    output: usize,
    direction: Direction,
    cfg: &OptConfig,
) -> Option<(Vec<f64>, f64)> {
    let sign = match direction {
        Direction::Min => 1.0,
        Direction::Max => -1.0,
    };
    let objective = Objective::new(|x: &[f64]| match net.infer(x) {
        Ok(y) => sign * y[output],
        Err(_) => f64::INFINITY,
    });
    let result = minimize(&objective, start, bounds, cfg);
    if result.status == OptStatus::LineSearchFailure {
        debug!(output, ?direction, iterations = result.iterations, "line search failed");
    }
    if !result.f_best.is_finite() {
        return None;
    }
    // Re-evaluate so the recorded bound is exactly the witness's output.
    let value = net.infer(&result.x_best).ok()?[output];
    Some((result.x_best, value))
}

/// Runs one minimization per output and direction, starting from the sampled
/// extremes, and widens the sampled range with whatever the optimizer finds.
pub fn refine_bounds(net: &Network, bounds: &InputBox, cands: &CandidateSet, cfg: &OptConfig) -> OutputBounds {
    let tasks: Vec<(usize, Direction)> = (0..cands.outputs.len())
        .flat_map(|j| [(j, Direction::Min), (j, Direction::Max)])
        .collect();
    let run = |&(j, dir): &(usize, Direction)| {
        let c = &cands.outputs[j];
        let start = match dir {
            Direction::Min => &c.argmin_point,
            Direction::Max => &c.argmax_point,
        };
        refine_one(net, bounds, start, j, dir, cfg)
    };
    #[cfg(feature = "parallel")]
    let refined: Vec<_> = {
        use rayon::prelude::*;
        tasks.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let refined: Vec<_> = tasks.iter().map(run).collect();

    let outputs = cands
        .outputs
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let mut bound = OutputBound {
                lo: c.min_value,
                hi: c.max_value,
                lo_witness: c.argmin_point.clone(),
                hi_witness: c.argmax_point.clone(),
            };
            if let Some((x, v)) = &refined[2 * j] {
                if *v < bound.lo {
                    bound.lo = *v;
                    bound.lo_witness = x.clone();
                }
            }
            if let Some((x, v)) = &refined[2 * j + 1] {
                if *v > bound.hi {
                    bound.hi = *v;
                    bound.hi_witness = x.clone();
                }
            }
            bound
        })
        .collect();
    OutputBounds {
        outputs,
        provenance: Provenance::Fresh,
    }
}

/// Bounds plus the sample set they were computed from. `outputs` is `None`
/// when the bounds came from the cache and the samples were not evaluated.
#[derive(Debug, Clone)]
pub struct BoundsEstimate {
    pub bounds: OutputBounds,
    pub samples: SampleSet,
    pub outputs: Option<Vec<Vec<f64>>>,
}

/// LHSMDU sampling, extreme extraction and refinement, with an optional
/// on-disk cache keyed by model bytes, box, seed and configuration.
pub fn estimate_output_bounds(
    net: &Network,
    bounds: &InputBox,
    seed: u64,
    cfg: &EstimateConfig,
    cache: Option<&BoundsCache>,
) -> Result<BoundsEstimate, EstimateError> {
    if bounds.dim() != net.input_dim() {
        return Err(EstimateError::DimensionMismatch {
            box_dim: bounds.dim(),
            input_dim: net.input_dim(),
        });
    }
    if cfg.samples_per_input == 0 {
        return Err(EstimateError::NoSamples);
    }
    let samples = lhsmdu(cfg.samples_per_input * net.input_dim(), bounds, seed);
    let key = CacheKey::new(net, bounds, seed, cfg);

    if let Some(cache) = cache {
        match cache.load(&key) {
            Ok(Some(outputs)) if outputs.len() == net.output_dim() => {
                debug!(key = %key.file_stem(), "bounds cache hit");
                return Ok(BoundsEstimate {
                    bounds: OutputBounds {
                        outputs,
                        provenance: Provenance::Cache,
                    },
                    samples,
                    outputs: None,
                });
            }
            Ok(Some(_)) => warn!(key = %key.file_stem(), "cached bounds have the wrong width; recomputing"),
            Ok(None) => {}
            Err(e) => warn!(key = %key.file_stem(), "ignoring unreadable cache entry: {e}"),
        }
    }

    let evaluated = evaluate_samples(net, &samples)?;
    let cands = candidates_from(&evaluated);
    let refined = refine_bounds(net, bounds, &cands, &cfg.optimizer);

    if let Some(cache) = cache {
        if let Err(e) = cache.store(&key, &refined.outputs) {
            warn!("could not write bounds cache entry: {e}");
        }
    }
    Ok(BoundsEstimate {
        bounds: refined,
        samples,
        outputs: Some(evaluated.outputs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::onnx_runtime::LayerOp;

    fn identity() -> Network {
        Network::from_layers(1, vec![LayerOp::dense(vec![vec![1.0]])]).unwrap()
    }

    fn rows(xs: &[f64]) -> SampleSet {
        SampleSet {
            points: xs.iter().map(|&x| vec![x]).collect(),
            seed: 0,
        }
    }

    #[test]
    fn identity_extremes() {
        let c = extract_optima(&identity(), &rows(&[0.1, 0.9, 0.4])).unwrap();
        assert_eq!(c.outputs[0].argmin_point, vec![0.1]);
        assert_eq!(c.outputs[0].argmax_point, vec![0.9]);
    }

    #[test]
    fn single_sample_is_both_extremes() {
        let c = extract_optima(&identity(), &rows(&[0.25])).unwrap();
        assert_eq!(c.outputs[0].argmin_point, c.outputs[0].argmax_point);
        assert_eq!((c.outputs[0].min_value, c.outputs[0].max_value), (0.25, 0.25));
    }

    #[test]
    fn sign_flip_pair() {
        let net = Network::from_layers(1, vec![LayerOp::dense(vec![vec![1.0, -1.0]])]).unwrap();
        let c = extract_optima(&net, &rows(&[0.2, 0.8])).unwrap();
        assert_eq!((c.outputs[0].argmin_point[0], c.outputs[0].argmax_point[0]), (0.2, 0.8));
        assert_eq!((c.outputs[1].argmin_point[0], c.outputs[1].argmax_point[0]), (0.8, 0.2));
    }

    #[test]
    fn ties_go_to_the_first_row() {
        let net = Network::from_layers(1, vec![LayerOp::dense(vec![vec![0.0]])]).unwrap();
        let c = extract_optima(&net, &rows(&[0.3, 0.1, 0.7])).unwrap();
        assert_eq!(c.outputs[0].argmin_point, vec![0.3]);
        assert_eq!(c.outputs[0].argmax_point, vec![0.3]);
    }

    #[test]
    fn affine_net_reaches_the_corners() {
        let net = Network::from_layers(1, vec![LayerOp::dense(vec![vec![2.0]]), LayerOp::bias(vec![1.0])]).unwrap();
        let b = InputBox::new(vec![0.0], vec![1.0]).unwrap();
        let c = extract_optima(&net, &rows(&[0.4, 0.6])).unwrap();
        let r = refine_bounds(&net, &b, &c, &OptConfig::default());
        assert!((r.outputs[0].lo - 1.0).abs() < 1e-6);
        assert!((r.outputs[0].hi - 3.0).abs() < 1e-6);
    }

    #[test]
    fn dimension_mismatch() {
        let b = InputBox::new(vec![0.0; 2], vec![1.0; 2]).unwrap();
        let err = estimate_output_bounds(&identity(), &b, 0, &EstimateConfig::default(), None).unwrap_err();
        assert_eq!(
            err,
            EstimateError::DimensionMismatch {
                box_dim: 2,
                input_dim: 1
            }
        );
    }
}
