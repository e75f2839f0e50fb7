//! Synthetic supervised datasets for the two CNN refiners, plus a versioned
//! binary container for persisting them.
//!
//! Both generators drive the same frame pipeline as the evaluation sweeps;
//! labels come from the simulator's ground truth.

use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::cnn_estimator::complex_to_planes;
use crate::error::{Result, SimError};
use crate::link::{
    apply_impairment, build_frame, draw_impairment, estimate_preamble_cfo, random_frame_bits,
    receive_classical, LinkContext,
};
use crate::nn::Tensor3;
use crate::rng::{rng_from, tags};

/// One channel-refiner sample: the interpolated least-squares estimate as
/// input planes, the true channel response as target planes, and the SNR the
/// frame was drawn at.
#[derive(Debug, Clone, PartialEq)]
pub struct CeCnnSample {
    pub input: Tensor3,
    pub target: Tensor3,
    pub snr_db: f64,
}

/// One offset-refiner sample: a window of raw preamble estimates as input
/// and the true offsets as target, both W x 1 x 1 and inside [-0.5, 0.5].
#[derive(Debug, Clone, PartialEq)]
pub struct CfoCnnSample {
    pub input: Tensor3,
    pub target: Tensor3,
}

/// Generate channel-refiner samples. Each sample simulates one frame at an
/// SNR drawn uniformly from `snr_range_db`, runs the classical front end
/// (preamble estimate, correction, least squares, interpolation) and packs
/// the estimate of one uniformly chosen payload symbol against the true
/// response. Samples are independent streams derived from the seed, so
/// generation parallelizes without changing the result.
pub fn generate_ce_dataset(
    n: usize,
    snr_range_db: (f64, f64),
    ctx: &LinkContext,
    seed: u64,
) -> Result<Vec<CeCnnSample>> {
    if n == 0 {
        return Err(SimError::EmptyDataset);
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from(seed, &[tags::CE_DATASET, i as u64]);
            let snr_db = rng.random_range(snr_range_db.0..=snr_range_db.1);
            let bits = random_frame_bits(ctx, &mut rng);
            let frame = build_frame(ctx, bits)?;
            let imp = draw_impairment(ctx, Some(snr_db), &mut rng)?;
            let rx = apply_impairment(&frame.time, &imp, ctx, &mut rng)?;
            let out = receive_classical(&rx, ctx)?;
            let symbol = rng.random_range(0..ctx.ofdm.num_symbols);
            let truth = imp.channel.cfr_at(&ctx.layout.occupied);
            Ok(CeCnnSample {
                input: complex_to_planes(&out.cfr_per_symbol[symbol].cfr),
                target: complex_to_planes(&truth),
                snr_db,
            })
        })
        .collect()
}

/// Generate offset-refiner samples. Each sample simulates `window`
/// consecutive frames with a freshly drawn offset (and channel, and uniform
/// SNR) per frame; the input is the raw per-frame preamble estimate sequence
/// and the target the true offset sequence.
pub fn generate_cfo_dataset(
    n: usize,
    window: usize,
    snr_range_db: (f64, f64),
    ctx: &LinkContext,
    seed: u64,
) -> Result<Vec<CfoCnnSample>> {
    if n == 0 || window == 0 {
        return Err(SimError::EmptyDataset);
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from(seed, &[tags::CFO_DATASET, i as u64]);
            let mut raw = Vec::with_capacity(window);
            let mut truth = Vec::with_capacity(window);
            for _ in 0..window {
                let snr_db = rng.random_range(snr_range_db.0..=snr_range_db.1);
                let bits = random_frame_bits(ctx, &mut rng);
                let frame = build_frame(ctx, bits)?;
                let imp = draw_impairment(ctx, Some(snr_db), &mut rng)?;
                let rx = apply_impairment(&frame.time, &imp, ctx, &mut rng)?;
                raw.push(estimate_preamble_cfo(&rx, ctx)?);
                truth.push(imp.cfo.epsilon);
            }
            Ok(CfoCnnSample {
                input: Tensor3::from_vec(window, 1, 1, raw)?,
                target: Tensor3::from_vec(window, 1, 1, truth)?,
            })
        })
        .collect()
}

/// A persisted dataset of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Ce(Vec<CeCnnSample>),
    Cfo(Vec<CfoCnnSample>),
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Ce(v) => v.len(),
            Dataset::Cfo(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Dataset::Ce(_) => "ce",
            Dataset::Cfo(_) => "cfo",
        }
    }

    /// Input/target tensor pairs for training.
    pub fn tensors(&self) -> (Vec<Tensor3>, Vec<Tensor3>) {
        match self {
            Dataset::Ce(v) => (
                v.iter().map(|s| s.input.clone()).collect(),
                v.iter().map(|s| s.target.clone()).collect(),
            ),
            Dataset::Cfo(v) => (
                v.iter().map(|s| s.input.clone()).collect(),
                v.iter().map(|s| s.target.clone()).collect(),
            ),
        }
    }
}

/// Header echoed into every dataset file.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub count: usize,
    pub dims: (usize, usize, usize),
    pub seed: u64,
    pub scenario_digest: u64,
}

const MAGIC: &[u8; 4] = b"HLDS";
pub const DATASET_FORMAT_VERSION: u32 = 1;

fn sample_dims(ds: &Dataset) -> Result<(usize, usize, usize)> {
    let dims = match ds {
        Dataset::Ce(v) => v.first().map(|s| s.input.dims()),
        Dataset::Cfo(v) => v.first().map(|s| s.input.dims()),
    };
    dims.ok_or(SimError::EmptyDataset)
}

pub fn dataset_to_bytes(ds: &Dataset, seed: u64, scenario_digest: u64) -> Result<Vec<u8>> {
    let dims = sample_dims(ds)?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&DATASET_FORMAT_VERSION.to_le_bytes());
    out.push(match ds {
        Dataset::Ce(_) => 0u8,
        Dataset::Cfo(_) => 1u8,
    });
    out.extend_from_slice(&(ds.len() as u64).to_le_bytes());
    out.extend_from_slice(&(dims.0 as u32).to_le_bytes());
    out.extend_from_slice(&(dims.1 as u32).to_le_bytes());
    out.extend_from_slice(&(dims.2 as u32).to_le_bytes());
    out.extend_from_slice(&seed.to_le_bytes());
    out.extend_from_slice(&scenario_digest.to_le_bytes());

    let push_tensor = |t: &Tensor3, out: &mut Vec<u8>| -> Result<()> {
        if t.dims() != dims {
            return Err(SimError::ShapeMismatch(
                "all samples in a dataset must share dims".into(),
            ));
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(())
    };
    match ds {
        Dataset::Ce(v) => {
            for s in v {
                push_tensor(&s.input, &mut out)?;
                push_tensor(&s.target, &mut out)?;
                out.extend_from_slice(&s.snr_db.to_le_bytes());
            }
        }
        Dataset::Cfo(v) => {
            for s in v {
                push_tensor(&s.input, &mut out)?;
                push_tensor(&s.target, &mut out)?;
            }
        }
    }
    Ok(out)
}

pub fn dataset_from_bytes(bytes: &[u8]) -> Result<(Dataset, DatasetHeader)> {
    let mut r = crate::nn::serialize::ByteReader::new(bytes);
    r.magic(MAGIC, "dataset")?;
    let version = r.u32()?;
    if version != DATASET_FORMAT_VERSION {
        return Err(SimError::FileFormat(format!(
            "dataset format version {version}, expected {DATASET_FORMAT_VERSION}"
        )));
    }
    let kind = r.u8()?;
    let count = r.u64()? as usize;
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let c = r.u32()? as usize;
    let seed = r.u64()?;
    let scenario_digest = r.u64()?;
    let elems = h * w * c;

    let header = DatasetHeader {
        count,
        dims: (h, w, c),
        seed,
        scenario_digest,
    };
    let ds = match kind {
        0 => {
            let mut v = Vec::with_capacity(count);
            for _ in 0..count {
                let input = Tensor3::from_vec(h, w, c, r.f64_vec(elems)?)?;
                let target = Tensor3::from_vec(h, w, c, r.f64_vec(elems)?)?;
                let snr_db = r.f64()?;
                v.push(CeCnnSample {
                    input,
                    target,
                    snr_db,
                });
            }
            Dataset::Ce(v)
        }
        1 => {
            let mut v = Vec::with_capacity(count);
            for _ in 0..count {
                let input = Tensor3::from_vec(h, w, c, r.f64_vec(elems)?)?;
                let target = Tensor3::from_vec(h, w, c, r.f64_vec(elems)?)?;
                v.push(CfoCnnSample { input, target });
            }
            Dataset::Cfo(v)
        }
        other => {
            return Err(SimError::FileFormat(format!("unknown dataset kind {other}")));
        }
    };
    if !r.done() {
        return Err(SimError::FileFormat("trailing bytes after dataset".into()));
    }
    Ok((ds, header))
}

pub fn save_dataset(
    ds: &Dataset,
    seed: u64,
    scenario_digest: u64,
    path: impl AsRef<Path>,
) -> Result<()> {
    fs::write(path, dataset_to_bytes(ds, seed, scenario_digest)?)?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<(Dataset, DatasetHeader)> {
    let bytes = fs::read(path)?;
    dataset_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{CfoMixture, RicianChannelSpec};
    use crate::cnn_estimator::planes_to_complex;
    use crate::waveform::OfdmConfig;

    fn ctx() -> LinkContext {
        LinkContext::new(
            OfdmConfig {
                num_symbols: 2,
                ..OfdmConfig::default()
            },
            RicianChannelSpec::default(),
            CfoMixture::from_seed(1),
            9,
        )
        .unwrap()
    }

    #[test]
    fn ce_dataset_shape_and_determinism() {
        let ctx = ctx();
        let a = generate_ce_dataset(20, (5.0, 15.0), &ctx, 42).unwrap();
        let b = generate_ce_dataset(20, (5.0, 15.0), &ctx, 42).unwrap();
        assert_eq!(a.len(), 20);
        assert_eq!(a, b, "same seed must give identical datasets");
        for s in &a {
            assert_eq!(s.input.dims(), (128, 2, 1));
            assert_eq!(s.target.dims(), (128, 2, 1));
            assert!((5.0..=15.0).contains(&s.snr_db));
        }
        let c = generate_ce_dataset(20, (5.0, 15.0), &ctx, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn ce_snr_draws_cover_the_range_uniformly() {
        let ctx = ctx();
        let ds = generate_ce_dataset(400, (5.0, 15.0), &ctx, 7).unwrap();
        let mean: f64 = ds.iter().map(|s| s.snr_db).sum::<f64>() / ds.len() as f64;
        // Uniform-mean oracle: expect 10 with stderr 10/sqrt(12*400) ~ 0.14.
        assert!((mean - 10.0).abs() < 0.5, "mean SNR {mean}");
    }

    #[test]
    fn ce_inputs_approach_targets_without_noise() {
        // At extreme SNR with a frozen zero offset, the least-squares input
        // differs from the truth only by interpolation error.
        let ctx = LinkContext::new(
            OfdmConfig {
                num_symbols: 1,
                ..OfdmConfig::default()
            },
            RicianChannelSpec::default(),
            CfoMixture::fixed(0.0),
            9,
        )
        .unwrap();
        let ds = generate_ce_dataset(5, (300.0, 300.0), &ctx, 3).unwrap();
        for s in &ds {
            let input = planes_to_complex(&s.input).unwrap();
            let target = planes_to_complex(&s.target).unwrap();
            let mse: f64 = input
                .iter()
                .zip(&target)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                / input.len() as f64;
            assert!(mse < 2e-3, "interpolation-only error should be small, got {mse}");
            // Exact at the pilot positions.
            for &p in &ctx.layout.pilot_positions {
                assert!((input[p] - target[p]).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn cfo_dataset_noiseless_input_equals_target() {
        // Noiseless Schmidl & Cox oracle: without noise the raw estimate is
        // the true offset to within numerical precision.
        let ctx = ctx();
        let ds = generate_cfo_dataset(3, 16, (300.0, 300.0), &ctx, 11).unwrap();
        for s in &ds {
            assert_eq!(s.input.dims(), (16, 1, 1));
            for (a, b) in s.input.data().iter().zip(s.target.data()) {
                assert!((a - b).abs() < 1e-9, "raw {a} vs true {b}");
                assert!(a.abs() <= 0.5 && b.abs() <= 0.5);
            }
        }
    }

    #[test]
    fn cfo_dataset_entries_stay_in_domain() {
        let ctx = ctx();
        let ds = generate_cfo_dataset(4, 32, (0.0, 10.0), &ctx, 13).unwrap();
        for s in &ds {
            assert!(s.input.data().iter().all(|v| v.abs() <= 0.5));
            assert!(s.target.data().iter().all(|v| v.abs() <= 0.5));
        }
    }

    #[test]
    fn dataset_files_round_trip_bit_exactly() {
        let ctx = ctx();
        let ce = Dataset::Ce(generate_ce_dataset(6, (5.0, 15.0), &ctx, 1).unwrap());
        let cfo = Dataset::Cfo(generate_cfo_dataset(4, 8, (5.0, 15.0), &ctx, 2).unwrap());
        let dir = tempfile::tempdir().unwrap();
        for (name, ds) in [("ce.bin", ce), ("cfo.bin", cfo)] {
            let path = dir.path().join(name);
            save_dataset(&ds, 99, 0xABCD, &path).unwrap();
            let (back, header) = load_dataset(&path).unwrap();
            assert_eq!(back, ds);
            assert_eq!(header.seed, 99);
            assert_eq!(header.scenario_digest, 0xABCD);
            assert_eq!(header.count, ds.len());
            // Byte-identical rewrite.
            let bytes = std::fs::read(&path).unwrap();
            assert_eq!(bytes, dataset_to_bytes(&ds, 99, 0xABCD).unwrap());
        }
    }

    #[test]
    fn dataset_format_errors_are_reported() {
        let ctx = ctx();
        let ds = Dataset::Cfo(generate_cfo_dataset(2, 4, (5.0, 15.0), &ctx, 2).unwrap());
        let bytes = dataset_to_bytes(&ds, 0, 0).unwrap();
        assert!(matches!(
            dataset_from_bytes(&bytes[..bytes.len() - 3]),
            Err(SimError::FileFormat(_))
        ));
        let mut wrong = bytes.clone();
        wrong[4] = 42;
        assert!(matches!(
            dataset_from_bytes(&wrong),
            Err(SimError::FileFormat(m)) if m.contains("version")
        ));
    }
}
