//! Multi-objective CMA-ES policy synthesis and policy-set extraction.
//!
//! The search runs in unit-box coordinates; [`to_params`] maps a point onto
//! the planner parameter box. Both PCS objectives are maximized.

pub mod cmaes;
pub mod dpp;
pub mod evaluate;
pub mod hypervolume;
pub mod pareto;

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::binio::{read_file, ByteReader, ByteWriter};
use crate::config::EsConfig;
use crate::error::{Error, Result};
use crate::pcs::{CollectionLabel, PcsNormalizer, PcsPoint, PolicyCollection, PolicyEntry};
use crate::planner::{PolicyParams, PARAM_DIM, PARAM_LOWER, PARAM_UPPER};

pub use cmaes::{generation_seed, CmaParams, CmaState};
pub use dpp::{dpp_pair, greedy_map, rbf_kernel};
pub use evaluate::{head_to_head, random_params, EvalSet, Evaluation, Evaluator, Pairing};
pub use hypervolume::{hypervolume_2d, hypervolume_loss, reference_point};
pub use pareto::{near_optimal_mask, pareto_mask};

const CHECKPOINT_MAGIC: &[u8; 4] = b"PCSE";
const CHECKPOINT_VERSION: u32 = 1;

/// Maps unit-box coordinates onto the planner parameter box.
pub fn to_params(x: &[f64], freeze_gamma: bool) -> PolicyParams {
    let mut v = [0.0; PARAM_DIM];
    for k in 0..PARAM_DIM {
        v[k] = PARAM_LOWER[k] + x[k].clamp(0.0, 1.0) * (PARAM_UPPER[k] - PARAM_LOWER[k]);
    }
    PolicyParams::from_array(v).with_frozen_gamma(freeze_gamma)
}

pub fn to_unit(p: &PolicyParams) -> Vec<f64> {
    p.to_array().iter().enumerate().map(|(k, v)| (v - PARAM_LOWER[k]) / (PARAM_UPPER[k] - PARAM_LOWER[k])).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveMember {
    pub x: Vec<f64>,
    pub pcs: PcsPoint,
}

/// Every elite kept so far, with the non-dominated mask kept current.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Archive {
    pub members: Vec<ArchiveMember>,
    pub pareto_mask: Vec<bool>,
}

impl Archive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        self.members.iter().map(|m| m.pcs.as_array()).collect()
    }

    pub fn extend(&mut self, members: impl IntoIterator<Item = ArchiveMember>) {
        self.members.extend(members);
        self.pareto_mask = pareto_mask(&self.points());
    }

    pub fn hypervolume(&self, reference: [f64; 2]) -> f64 {
        hypervolume_2d(&self.points(), reference)
    }

    pub fn collection(&self, freeze_gamma: bool) -> Result<PolicyCollection> {
        let entries = self.members.iter().map(|m| PolicyEntry { params: to_params(&m.x, freeze_gamma), pcs: m.pcs }).collect();
        PolicyCollection::new(entries, CollectionLabel::All)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsOptions {
    pub population: usize,
    pub elite_ratio: f64,
    pub sigma0: f64,
    pub generations: usize,
    pub seed: u64,
    pub freeze_gamma: bool,
}

impl EsOptions {
    pub fn from_config(cfg: &EsConfig, seed: u64, freeze_gamma: bool) -> Self {
        Self {
            population: cfg.population,
            elite_ratio: cfg.elite_ratio,
            sigma0: cfg.sigma0,
            generations: cfg.generations,
            seed,
            freeze_gamma,
        }
    }

    pub fn elite_count(&self) -> usize {
        ((self.elite_ratio * self.population as f64).ceil() as usize).clamp(1, self.population)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStats {
    pub generation: u64,
    pub best_agg: f64,
    pub best_res: f64,
    pub hypervolume: f64,
    pub crash_rate: f64,
    pub overtake_rate: f64,
    pub evaluated: usize,
}

/// Resumable synthesis state.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub es: CmaState,
    pub archive: Archive,
    pub reference: Option<[f64; 2]>,
    pub population: usize,
    pub history: Vec<GenerationStats>,
}

impl Synthesis {
    pub fn new(opts: &EsOptions) -> Result<Self> {
        if opts.population < 2 {
            return Err(Error::InvalidArgument("population must be >= 2".into()));
        }
        if !(opts.sigma0 > 0.0) {
            return Err(Error::InvalidArgument("sigma0 must be > 0".into()));
        }
        let es = CmaState::new(vec![0.5; PARAM_DIM], opts.sigma0, opts.elite_count(), opts.seed);
        Ok(Self { es, archive: Archive::new(), reference: None, population: opts.population, history: Vec::new() })
    }

    /// Same as [`Synthesis::new`] for an arbitrary search dimension.
    pub fn with_dim(dim: usize, opts: &EsOptions) -> Result<Self> {
        let mut s = Self::new(opts)?;
        s.es = CmaState::new(vec![0.5; dim], opts.sigma0, opts.elite_count(), opts.seed);
        Ok(s)
    }

    /// One generation: sample, evaluate in parallel, rank by hypervolume loss,
    /// archive the elites and update the search distribution.
    pub fn step<F>(&mut self, eval: &F) -> Result<GenerationStats>
    where
        F: Fn(&[f64]) -> Result<Evaluation> + Sync,
    {
        let xs = self.es.sample(self.population);
        let results: Vec<Result<Evaluation>> = xs.par_iter().map(|x| eval(x)).collect();
        let mut cands: Vec<(Vec<f64>, Evaluation)> = Vec::with_capacity(xs.len());
        for (x, r) in xs.into_iter().zip(results) {
            match r {
                Ok(e) if e.pcs.is_finite() => cands.push((x, e)),
                Ok(e) => log::warn!("non-finite evaluation {:?} dropped", e.pcs),
                Err(e) => log::warn!("evaluation failed: {e}"),
            }
        }
        if cands.is_empty() {
            return Err(Error::Simulation(format!("generation {}: every evaluation failed", self.es.generation)));
        }
        let pts: Vec<[f64; 2]> = cands.iter().map(|c| c.1.pcs.as_array()).collect();
        let reference = *self.reference.get_or_insert_with(|| reference_point(&pts));
        let loss = hypervolume_loss(&self.archive.points(), &pts, reference);
        // Candidates the archive already dominates all lose nothing; their own
        // rectangle area orders them.
        let own: Vec<f64> = pts.iter().map(|p| hypervolume_2d(&[*p], reference)).collect();
        let mut order: Vec<usize> = (0..cands.len()).collect();
        order.sort_by(|&a, &b| loss[a].total_cmp(&loss[b]).then(own[b].total_cmp(&own[a])));
        let mu = self.es.params.mu.min(cands.len());
        let elites: Vec<Vec<f64>> = order[..mu].iter().map(|&i| cands[i].0.clone()).collect();
        self.archive.extend(order[..mu].iter().map(|&i| ArchiveMember { x: cands[i].0.clone(), pcs: cands[i].1.pcs }));
        let gen = self.es.generation;
        self.es.update(&elites);
        let n = cands.len() as f64;
        let stats = GenerationStats {
            generation: gen,
            best_agg: pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max),
            best_res: pts.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max),
            hypervolume: self.archive.hypervolume(reference),
            crash_rate: cands.iter().map(|c| c.1.crash_rate).sum::<f64>() / n,
            overtake_rate: cands.iter().map(|c| c.1.overtake_rate).sum::<f64>() / n,
            evaluated: cands.len(),
        };
        self.history.push(stats);
        Ok(stats)
    }

    /// Runs until `generations` have been completed in total.
    pub fn run<F>(&mut self, generations: usize, eval: &F, mut on_generation: impl FnMut(&Self, &GenerationStats) -> Result<()>) -> Result<()>
    where
        F: Fn(&[f64]) -> Result<Evaluation> + Sync,
    {
        while (self.es.generation as usize) < generations {
            let st = self.step(eval)?;
            log::info!("gen {} hv {:.4} best ({:.3}, {:.3})", st.generation, st.hypervolume, st.best_agg, st.best_res);
            on_generation(self, &st)?;
        }
        Ok(())
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let s = &self.es;
        let dim = s.dim();
        let mut w = ByteWriter::new();
        w.bytes(CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        w.u32(dim as u32);
        w.u32(self.population as u32);
        w.u32(s.params.mu as u32);
        w.u64(s.seed);
        w.u64(s.generation);
        w.u64(s.repairs);
        w.f64(s.sigma);
        w.f64s(s.mean.as_slice());
        w.f64s(s.cov.as_slice());
        w.f64s(s.p_sigma.as_slice());
        w.f64s(s.p_c.as_slice());
        match self.reference {
            Some(r) => {
                w.u8(1);
                w.f64s(&r);
            }
            None => w.u8(0),
        }
        w.u64(self.archive.len() as u64);
        for m in &self.archive.members {
            w.f64s(&m.x);
            w.f64(m.pcs.agg);
            w.f64(m.pcs.res);
        }
        w.write_to(path)
    }

    /// Restores the search state and archive; the per-generation history is not stored.
    pub fn load_checkpoint(path: &Path) -> Result<Self> {
        let data = read_file(path)?;
        let mut r = ByteReader::new(&data, "ES checkpoint");
        r.expect_magic(CHECKPOINT_MAGIC)?;
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("ES checkpoint version {version}, expected {CHECKPOINT_VERSION}")));
        }
        let dim = r.u32()? as usize;
        let population = r.u32()? as usize;
        let mu = r.u32()? as usize;
        if dim == 0 || mu == 0 {
            return Err(Error::Format("ES checkpoint: zero dimension or elite count".into()));
        }
        let seed = r.u64()?;
        let generation = r.u64()?;
        let repairs = r.u64()?;
        let sigma = r.f64()?;
        let mut es = CmaState::new(r.f64s(dim)?, sigma, mu, seed);
        es.cov = nalgebra::DMatrix::from_vec(dim, dim, r.f64s(dim * dim)?);
        es.p_sigma = nalgebra::DVector::from_vec(r.f64s(dim)?);
        es.p_c = nalgebra::DVector::from_vec(r.f64s(dim)?);
        es.generation = generation;
        es.repairs = repairs;
        let reference = match r.u8()? {
            0 => None,
            _ => Some([r.f64()?, r.f64()?]),
        };
        let n = r.u64()? as usize;
        let mut members = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let x = r.f64s(dim)?;
            let pcs = PcsPoint::new(r.f64()?, r.f64()?);
            members.push(ArchiveMember { x, pcs });
        }
        r.finish()?;
        let mut archive = Archive::new();
        archive.extend(members);
        Ok(Self { es, archive, reference, population, history: Vec::new() })
    }
}

pub fn write_progress_csv(path: &Path, history: &[GenerationStats]) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(f, "gen,best_agg,best_res,hypervolume,crash_rate,overtake_rate").map_err(io)?;
    for h in history {
        writeln!(f, "{},{},{},{},{},{}", h.generation, h.best_agg, h.best_res, h.hypervolume, h.crash_rate, h.overtake_rate)
            .map_err(io)?;
    }
    f.flush().map_err(io)
}

/// Index sets into the input points.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedSets {
    pub pareto: Vec<usize>,
    pub near_optimal: Vec<usize>,
    pub dpp: (Vec<usize>, Vec<usize>),
}

/// Pareto front, near-optimal members (within `d_near` of the front) and two
/// disjoint DPP subsets of size `n_dpp` drawn from the near-optimal set.
/// Distances are taken on `points` as given.
pub fn extract_sets<R: Rng>(points: &[[f64; 2]], d_near: f64, n_dpp: usize, rng: &mut R) -> Result<ExtractedSets> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("archive is empty".into()));
    }
    let pm = pareto_mask(points);
    let nm = near_optimal_mask(points, &pm, d_near);
    let pareto: Vec<usize> = (0..points.len()).filter(|&i| pm[i]).collect();
    let near: Vec<usize> = (0..points.len()).filter(|&i| nm[i]).collect();
    if near.len() < 2 * n_dpp {
        return Err(Error::InvalidArgument(format!(
            "near-optimal set has {} members, two DPP subsets of {} need {}",
            near.len(),
            n_dpp,
            2 * n_dpp
        )));
    }
    let near_pts: Vec<[f64; 2]> = near.iter().map(|&i| points[i]).collect();
    let (a, b) = dpp_pair(&near_pts, n_dpp, rng);
    Ok(ExtractedSets { pareto, near_optimal: near.clone(), dpp: (a.iter().map(|&i| near[i]).collect(), b.iter().map(|&i| near[i]).collect()) })
}

/// The four labelled collections extracted from a raw archive collection.
/// Distances are measured after per-axis normalization to [0, 1].
#[derive(Debug, Clone)]
pub struct PolicySets {
    pub pareto: PolicyCollection,
    pub near_optimal: PolicyCollection,
    pub dpp1: PolicyCollection,
    pub dpp2: PolicyCollection,
    pub normalizer: PcsNormalizer,
}

pub fn extract_collections<R: Rng>(all: &PolicyCollection, d_near: f64, n_dpp: usize, rng: &mut R) -> Result<PolicySets> {
    let normalizer = PcsNormalizer::fit(&all.points())?;
    let pts: Vec<[f64; 2]> = all.entries.iter().map(|e| normalizer.apply(e.pcs).as_array()).collect();
    let sets = extract_sets(&pts, d_near, n_dpp, rng)?;
    let pick = |idx: &[usize], label| PolicyCollection::new(idx.iter().map(|&i| all.entries[i]).collect(), label);
    Ok(PolicySets {
        pareto: pick(&sets.pareto, CollectionLabel::Pareto)?,
        near_optimal: pick(&sets.near_optimal, CollectionLabel::NearOptimal)?,
        dpp1: pick(&sets.dpp.0, CollectionLabel::DppSubset)?,
        dpp2: pick(&sets.dpp.1, CollectionLabel::DppSubset)?,
        normalizer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn opts(seed: u64) -> EsOptions {
        EsOptions { population: 40, elite_ratio: 0.5, sigma0: 0.3, generations: 0, seed, freeze_gamma: false }
    }

    // Maximization form of a ZDT1-like problem: front f2 = 1 - sqrt(f1).
    fn zdt(x: &[f64]) -> Result<Evaluation> {
        let g = 1.0 + 9.0 * x[1..].iter().sum::<f64>() / (x.len() - 1) as f64;
        let f1 = x[0];
        let f2 = g * (1.0 - (f1 / g).sqrt());
        Ok(Evaluation::from_pcs(PcsPoint::new(-f1, -f2)))
    }

    #[test]
    fn param_mapping_round_trip() {
        let x = vec![0.0, 1.0, 0.5, 0.25, 0.75, 0.1, 0.9, 0.3];
        let p = to_params(&x, false);
        assert!(p.in_bounds());
        for (a, b) in to_unit(&p).iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(to_params(&x, true).gamma_v, 1.0);
    }

    #[test]
    fn archive_mask_tracks_dominance_and_hv_grows() {
        let mut s = Synthesis::new(&opts(3)).unwrap();
        let mut last = 0.0;
        for _ in 0..10 {
            let st = s.step(&zdt).unwrap();
            assert!(st.hypervolume >= last);
            last = st.hypervolume;
            let pts = s.archive.points();
            for (i, p) in pts.iter().enumerate() {
                let dominated = pts.iter().any(|q| q[0] >= p[0] && q[1] >= p[1] && (q[0] > p[0] || q[1] > p[1]));
                assert_eq!(s.archive.pareto_mask[i], !dominated);
            }
        }
        assert_eq!(s.archive.len(), 10 * 20);
    }

    #[test]
    fn checkpoint_round_trip_resumes_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("es.bin");
        let mut a = Synthesis::new(&opts(5)).unwrap();
        a.step(&zdt).unwrap();
        a.save_checkpoint(&path).unwrap();
        let mut b = Synthesis::load_checkpoint(&path).unwrap();
        assert_eq!(b.es, a.es);
        assert_eq!(b.archive, a.archive);
        a.step(&zdt).unwrap();
        b.step(&zdt).unwrap();
        assert_eq!(a.archive, b.archive);
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(Synthesis::load_checkpoint(&path), Err(Error::Format(_))));
    }

    #[test]
    fn extract_requires_enough_near_optimal() {
        let pts = [[1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = extract_sets(&pts, 0.3, 1, &mut rng).unwrap();
        assert_eq!(e.pareto, vec![0, 1]);
        assert_eq!(e.near_optimal, vec![0, 1]);
        assert_eq!(e.dpp.0.len() + e.dpp.1.len(), 2);
        assert!(extract_sets(&pts, 0.3, 2, &mut rng).is_err());
    }

    #[test]
    fn pareto_front_is_near_optimal() {
        let pts: Vec<[f64; 2]> = (0..20).map(|i| [i as f64 / 19.0, 1.0 - (i as f64 / 19.0).powi(2)]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = extract_sets(&pts, 0.3, 5, &mut rng).unwrap();
        assert_eq!(e.pareto.len(), 20);
        assert_eq!(e.near_optimal.len(), 20);
        assert!(e.dpp.0.iter().all(|i| !e.dpp.1.contains(i)));
    }

    #[test]
    fn progress_csv_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("progress.csv");
        let mut s = Synthesis::new(&opts(2)).unwrap();
        s.run(2, &zdt, |_, _| Ok(())).unwrap();
        write_progress_csv(&p, &s.history).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("gen,best_agg,best_res,hypervolume,crash_rate,overtake_rate\n0,"));
        assert_eq!(text.lines().count(), 3);
    }
}

