//! Long sequences from a fixed-window model. The timeline is covered by
//! overlapping windows; at every reverse step each window and each overlap
//! is denoised on its own, and the clean estimates are merged as
//! `sum(windows) - sum(overlaps)` before a single global posterior update.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::diffusion::{guided_x0, initial_state, run_chain, ConditioningBundle, NoiseSchedule, SamplerConfig, X0Predictor};
use crate::error::{Error, Result};
use crate::injection::{InjectionConfig, InjectionTarget, Injector};

/// Windows covering `[0, total)` and the intersections of consecutive ones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentGraph {
    pub total: usize,
    pub segments: Vec<Range<usize>>,
    pub overlaps: Vec<Range<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LongConfig {
    /// Window length in latent frames.
    pub window: usize,
    /// Overlap between consecutive windows in latent frames.
    pub overlap: usize,
}

impl Default for LongConfig {
    fn default() -> Self {
        Self { window: 90, overlap: 30 }
    }
}

/// Segments start every `window - overlap` frames; the last one is moved
/// back so it ends at `total`, which can only lengthen its overlap.
pub fn plan_segments(total: usize, window: usize, overlap: usize) -> Result<SegmentGraph> {
    if overlap == 0 || overlap >= window {
        return Err(Error::InvalidArgument(format!(
            "need window > overlap >= 1, got window {window}, overlap {overlap}"
        )));
    }
    if total < window {
        return Err(Error::TooShort(format!(
            "{total} latent frames is shorter than the {window}-frame window"
        )));
    }
    let step = window - overlap;
    let mut starts = vec![0];
    while starts.last().expect("non-empty") + window < total {
        let next = starts.last().expect("non-empty") + step;
        starts.push(next.min(total - window));
    }
    let segments: Vec<Range<usize>> = starts.iter().map(|&s| s..s + window).collect();
    let overlaps = segments.windows(2).map(|p| p[1].start..p[0].end).collect();
    Ok(SegmentGraph {
        total,
        segments,
        overlaps,
    })
}

impl SegmentGraph {
    /// `(#segments, #overlaps)` covering each index.
    pub fn coverage(&self) -> Vec<(usize, usize)> {
        let mut c = vec![(0, 0); self.total];
        for s in &self.segments {
            for i in s.clone() {
                c[i].0 += 1;
            }
        }
        for o in &self.overlaps {
            for i in o.clone() {
                c[i].1 += 1;
            }
        }
        c
    }
}

/// Sum of covering segment predictions minus covering overlap predictions
/// at every index. Each prediction holds `range.len() * dim` values.
pub fn merged_prediction(
    segment_predictions: &[Vec<f64>],
    overlap_predictions: &[Vec<f64>],
    graph: &SegmentGraph,
    dim: usize,
) -> Result<Vec<f64>> {
    if segment_predictions.len() != graph.segments.len() || overlap_predictions.len() != graph.overlaps.len() {
        return Err(Error::shape(
            "segment predictions",
            format!("{} segments, {} overlaps", graph.segments.len(), graph.overlaps.len()),
            format!("{}, {}", segment_predictions.len(), overlap_predictions.len()),
        ));
    }
    for (p, r) in segment_predictions
        .iter()
        .zip(&graph.segments)
        .chain(overlap_predictions.iter().zip(&graph.overlaps))
    {
        if p.len() != r.len() * dim {
            return Err(Error::shape("segment prediction", r.len() * dim, p.len()));
        }
    }
    let coverage = graph.coverage();
    if let Some(i) = coverage.iter().position(|&(s, _)| s == 0) {
        return Err(Error::InvalidArgument(format!("latent frame {i} is not covered by any segment")));
    }
    let mut out = vec![0.0; graph.total * dim];
    let mut filled = vec![false; graph.total];
    for (p, r) in segment_predictions.iter().zip(&graph.segments) {
        for (k, i) in r.clone().enumerate() {
            if coverage[i] == (1, 0) {
                out[i * dim..(i + 1) * dim].copy_from_slice(&p[k * dim..(k + 1) * dim]);
                filled[i] = true;
            }
        }
    }
    for (p, r) in segment_predictions.iter().zip(&graph.segments) {
        for (k, i) in r.clone().enumerate() {
            if !filled[i] {
                for j in 0..dim {
                    out[i * dim + j] += p[k * dim + j];
                }
            }
        }
    }
    for (p, r) in overlap_predictions.iter().zip(&graph.overlaps) {
        for (k, i) in r.clone().enumerate() {
            for j in 0..dim {
                out[i * dim + j] -= p[k * dim + j];
            }
        }
    }
    Ok(out)
}

/// Merged guided clean estimate for a batch of full-length states.
fn merged_x0<P: X0Predictor + ?Sized>(
    model: &P,
    x: &[f64],
    t: usize,
    conds: &[&ConditioningBundle],
    graph: &SegmentGraph,
    schedule: &NoiseSchedule,
    sampler: &SamplerConfig,
) -> Result<Vec<f64>> {
    let dim = model.latent_dim();
    let per = graph.total * dim;
    let batch = conds.len();
    // Windows grouped by length so each group is one model call.
    let mut groups: BTreeMap<usize, Vec<(usize, bool, usize)>> = BTreeMap::new();
    for b in 0..batch {
        for (k, r) in graph.segments.iter().enumerate() {
            groups.entry(r.len()).or_default().push((b, true, k));
        }
        for (k, r) in graph.overlaps.iter().enumerate() {
            groups.entry(r.len()).or_default().push((b, false, k));
        }
    }
    let mut seg_preds = vec![vec![Vec::new(); graph.segments.len()]; batch];
    let mut ovl_preds = vec![vec![Vec::new(); graph.overlaps.len()]; batch];
    for (len, items) in groups {
        let mut xs = Vec::with_capacity(items.len() * len * dim);
        let mut cs = Vec::with_capacity(items.len());
        for &(b, is_seg, k) in &items {
            let r = if is_seg { &graph.segments[k] } else { &graph.overlaps[k] };
            xs.extend_from_slice(&x[b * per + r.start * dim..b * per + r.end * dim]);
            cs.push(if r.len() == graph.total {
                conds[b].clone()
            } else {
                conds[b].slice(r.start, r.end)?
            });
        }
        let refs: Vec<&ConditioningBundle> = cs.iter().collect();
        let pred = guided_x0(model, &xs, len, t, &refs, schedule, sampler)?;
        for (&(b, is_seg, k), p) in items.iter().zip(pred.chunks(len * dim)) {
            if is_seg {
                seg_preds[b][k] = p.to_vec();
            } else {
                ovl_preds[b][k] = p.to_vec();
            }
        }
    }
    let mut out = Vec::with_capacity(batch * per);
    for b in 0..batch {
        let mut m = merged_prediction(&seg_preds[b], &ovl_preds[b], graph, dim)?;
        if graph.segments.len() > 1 {
            if let Some(c) = sampler.clip_x0 {
                for v in &mut m {
                    *v = v.clamp(-c, c);
                }
            }
        }
        out.extend(m);
    }
    Ok(out)
}

/// Samples one standardized sequence of `total` latent frames per seed.
/// Conditioning bundles span the whole timeline; an optional injection
/// target per sequence is applied to the merged state.
#[allow(clippy::too_many_arguments)]
pub fn sample_long_batch<P: X0Predictor + ?Sized>(
    model: &P,
    conds: &[&ConditioningBundle],
    total: usize,
    schedule: &NoiseSchedule,
    sampler: &SamplerConfig,
    long: &LongConfig,
    seeds: &[u64],
    injection: Option<(&[&InjectionTarget], &InjectionConfig)>,
) -> Result<Vec<Vec<f64>>> {
    let graph = plan_segments(total, long.window, long.overlap)?;
    if conds.len() != seeds.len() {
        return Err(Error::shape("seeds", conds.len(), seeds.len()));
    }
    for c in conds {
        if c.len() != total {
            return Err(Error::shape("conditioning length", total, c.len()));
        }
    }
    let dim = model.latent_dim();
    let mut injector = match injection {
        Some((targets, cfg)) => Some(Injector::new(targets, seeds, total, dim, schedule, cfg)?),
        None => None,
    };
    let (x, mut rngs) = initial_state(seeds, total * dim);
    let out = run_chain(
        schedule,
        x,
        sampler.variance,
        &mut rngs,
        |x, t| merged_x0(model, x, t, conds, &graph, schedule, sampler),
        |x, t| match injector.as_mut() {
            Some(inj) => inj.after_step(x, t, schedule),
            None => Ok(()),
        },
    )?;
    Ok(out.chunks(total * dim).map(|c| c.to_vec()).collect())
}

#[allow(clippy::too_many_arguments)]
pub fn sample_long<P: X0Predictor + ?Sized>(
    model: &P,
    cond: &ConditioningBundle,
    total: usize,
    schedule: &NoiseSchedule,
    sampler: &SamplerConfig,
    long: &LongConfig,
    seed: u64,
    injection: Option<(&InjectionTarget, &InjectionConfig)>,
) -> Result<Vec<f64>> {
    let targets;
    let inj = match injection {
        Some((t, c)) => {
            targets = [t];
            Some((&targets[..], c))
        }
        None => None,
    };
    Ok(sample_long_batch(model, &[cond], total, schedule, sampler, long, &[seed], inj)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{make_linear_schedule, sample};
    use proptest::prelude::*;

    fn check_graph(g: &SegmentGraph, window: usize, overlap: usize) {
        assert_eq!(g.segments[0].start, 0);
        assert_eq!(g.segments.last().unwrap().end, g.total);
        for s in &g.segments {
            assert_eq!(s.len(), window);
        }
        for (k, o) in g.overlaps.iter().enumerate() {
            assert_eq!(o.start, g.segments[k + 1].start);
            assert_eq!(o.end, g.segments[k].end);
            if k + 1 < g.overlaps.len() {
                assert_eq!(o.len(), overlap);
            } else {
                assert!(o.len() >= overlap);
            }
        }
        for (s, o) in g.coverage() {
            assert_eq!(s as i64 - o as i64, 1);
        }
    }

    #[test]
    fn documented_examples() {
        let g = plan_segments(90, 90, 30).unwrap();
        assert_eq!(g.segments, vec![0..90]);
        assert!(g.overlaps.is_empty());
        let g = plan_segments(150, 90, 30).unwrap();
        assert_eq!(g.segments, vec![0..90, 60..150]);
        assert_eq!(g.overlaps, vec![60..90]);
        assert!(plan_segments(80, 90, 30).is_err());
        assert!(plan_segments(100, 90, 90).is_err());
        assert!(plan_segments(100, 90, 0).is_err());
        assert_eq!(plan_segments(450, 90, 30).unwrap().segments.len(), 7);
    }

    proptest! {
        #[test]
        fn graphs_are_valid(window in 2usize..40, frac in 0.0f64..1.0, extra in 0usize..200) {
            let overlap = 1 + ((window - 2) as f64 * frac) as usize;
            let g = plan_segments(window + extra, window, overlap).unwrap();
            check_graph(&g, window, overlap);
        }
    }

    #[test]
    fn merge_cases() {
        let g = plan_segments(5, 5, 2).unwrap();
        let p = vec![vec![1.0, 2.0, 3.0, 4.0, 5.0]];
        assert_eq!(merged_prediction(&p, &[], &g, 1).unwrap(), p[0]);
        let g = plan_segments(7, 5, 3).unwrap();
        let s1 = vec![1.0, 2.0, 7.0, 7.0, 7.0];
        let s2 = vec![7.0, 7.0, 7.0, 4.0, 5.0];
        let o = vec![7.0, 7.0, 7.0];
        let m = merged_prediction(&[s1, s2], &[o], &g, 1).unwrap();
        assert_eq!(m, vec![1.0, 2.0, 7.0, 7.0, 7.0, 4.0, 5.0]);
        assert!(merged_prediction(&[vec![0.0; 5]], &[], &g, 1).is_err());
    }

    /// Clean scores of a stationary AR(1) chain: for a Markov chain the
    /// joint score is the sum of window scores minus overlap scores.
    #[test]
    fn gaussian_chain_score_composition() {
        use nalgebra::DMatrix;
        let rho: f64 = 0.7;
        let n = 9;
        let cov = |m: usize| DMatrix::from_fn(m, m, |i, j| rho.powi((i as i32 - j as i32).abs()));
        let score = |x: &[f64]| -> Vec<f64> {
            let p = cov(x.len()).try_inverse().unwrap();
            let v = p * nalgebra::DVector::from_column_slice(x);
            v.iter().map(|s| -s).collect()
        };
        let g = plan_segments(n, 5, 2).unwrap();
        let x: Vec<f64> = (0..n).map(|i| ((i * 7) % 5) as f64 * 0.3 - 0.6).collect();
        let seg: Vec<Vec<f64>> = g.segments.iter().map(|r| score(&x[r.clone()])).collect();
        let ovl: Vec<Vec<f64>> = g.overlaps.iter().map(|r| score(&x[r.clone()])).collect();
        let merged = merged_prediction(&seg, &ovl, &g, 1).unwrap();
        for (a, b) in merged.iter().zip(score(&x)) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    struct Shrink;

    impl X0Predictor for Shrink {
        fn latent_dim(&self) -> usize {
            2
        }
        fn predict_x0(&self, x: &[f64], _: usize, _: usize, c: &[&ConditioningBundle]) -> Result<Vec<f64>> {
            let bias = if c[0].is_null() { 0.0 } else { 0.3 };
            Ok(x.iter().map(|v| 0.5 * v + bias).collect())
        }
    }

    #[test]
    fn single_segment_matches_plain_sampler() {
        let s = make_linear_schedule(30, 1e-4, 0.2).unwrap();
        let c = ConditioningBundle::new(6, 1, vec![0.5; 6], 0).unwrap();
        let sc = SamplerConfig::default();
        let long = LongConfig { window: 6, overlap: 2 };
        let a = sample_long(&Shrink, &c, 6, &s, &sc, &long, 4, None).unwrap();
        let b = sample(&Shrink, &c, 6, &s, &sc, 4).unwrap();
        assert_eq!(a, b);
        let long_run = sample_long(&Shrink, &ConditioningBundle::new(15, 1, vec![0.5; 15], 0).unwrap(), 15, &s, &sc, &long, 4, None).unwrap();
        assert_eq!(long_run.len(), 30);
        assert!(long_run.iter().all(|v| v.is_finite()));
    }
}
