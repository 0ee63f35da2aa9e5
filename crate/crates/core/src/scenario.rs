//! Seeded synthetic instances with retained ground truth.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, normalize_columns, CMat};
use crate::operators::MixingOperator;
use crate::problem::ProblemInstance;

/// The three measurement setups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum MixingCase {
    /// Case 1: `F(X) = A X`.
    Spatial,
    /// Case 2: `F(X) = A X B` with `B` a short-time Fourier transform.
    Stft,
    /// Case 3: a separate spatial mixer per snapshot.
    PerSnapshot,
}

impl MixingCase {
    pub fn number(self) -> u8 {
        match self {
            MixingCase::Spatial => 1,
            MixingCase::Stft => 2,
            MixingCase::PerSnapshot => 3,
        }
    }
}

impl TryFrom<u8> for MixingCase {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(MixingCase::Spatial),
            2 => Ok(MixingCase::Stft),
            3 => Ok(MixingCase::PerSnapshot),
            _ => Err(Error::Parameter(format!("mixing case must be 1, 2 or 3, got {v}"))),
        }
    }
}

impl From<MixingCase> for u8 {
    fn from(c: MixingCase) -> u8 {
        c.number()
    }
}

/// Sizes and noise level of a synthetic instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    pub case: MixingCase,
    /// Signal dimension.
    pub n: usize,
    /// Number of atoms.
    pub p: usize,
    /// Number of snapshots.
    pub i: usize,
    /// Spatial measurement dimension.
    pub m1: usize,
    /// Nonzeros per code column.
    pub l: usize,
    /// `None` (or `null` in files) means noiseless.
    #[serde(default)]
    pub snr_db: Option<f64>,
    /// Scale the true atoms to unit norm.
    #[serde(default)]
    pub normalize_dict: bool,
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m1 == 0 || self.p == 0 {
            return Err(Error::Parameter("n, m1 and p must be positive".into()));
        }
        if self.p >= self.i {
            return Err(Error::Parameter(format!(
                "need P < I, got P = {}, I = {}",
                self.p, self.i
            )));
        }
        if self.l == 0 || self.l > self.p {
            return Err(Error::Parameter(format!(
                "need 1 ≤ L ≤ P, got L = {}, P = {}",
                self.l, self.p
            )));
        }
        if self.case == MixingCase::Stft && self.i % 4 != 0 {
            return Err(Error::Parameter(format!(
                "the STFT case needs I divisible by 4, got {}",
                self.i
            )));
        }
        if self.snr_db.is_some_and(f64::is_nan) {
            return Err(Error::Parameter("snr_db is NaN".into()));
        }
        Ok(())
    }

    /// Noise level in dB, `None` when noiseless.
    pub fn finite_snr(&self) -> Option<f64> {
        self.snr_db.filter(|s| s.is_finite())
    }
}

/// A generated instance together with everything used to build it.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub inst: ProblemInstance,
    pub d_true: CMat,
    pub z_true: CMat,
    pub x_true: CMat,
    /// Additive real noise before clamping.
    pub noise: Array2<f64>,
    pub params: ScenarioParams,
    pub seed: u64,
}

impl Scenario {
    pub fn snr_db(&self) -> Option<f64> {
        self.params.finite_snr()
    }

    /// `10·log₁₀(‖|F(X_true)|‖² / ‖noise‖²)`; infinite when noiseless.
    pub fn realized_snr_db(&self) -> f64 {
        let sig: f64 = self
            .inst
            .op()
            .apply(&self.x_true)
            .expect("ground truth matches operator")
            .iter()
            .map(|v| v.norm_sqr())
            .sum();
        let noise: f64 = self.noise.iter().map(|v| v * v).sum();
        10.0 * (sig / noise).log10()
    }
}

/// Rectangular-window STFT as an `I × 5I` matrix acting on the right.
///
/// Frame `f ∈ 0..5` starts at `s_f = (f − 1)·I/4` and covers `I/2` samples;
/// samples outside `[0, I)` are treated as zero. Column `f·I + k` holds
/// `e^{−2πi·k·(t − s_f)/I}` on the frame's support, so the phase is measured
/// from the frame start.
pub fn stft_matrix(i: usize) -> Result<CMat> {
    if i == 0 || i % 4 != 0 {
        return Err(Error::Parameter(format!(
            "STFT length must be a positive multiple of 4, got {i}"
        )));
    }
    let hop = (i / 4) as isize;
    let win = i / 2;
    let mut b = CMat::zeros((i, 5 * i));
    for f in 0..5 {
        let start = (f as isize - 1) * hop;
        for local in 0..win {
            let t = start + local as isize;
            if t < 0 || t >= i as isize {
                continue;
            }
            for k in 0..i {
                let angle = -2.0 * PI * (k * local) as f64 / i as f64;
                b[[t as usize, f * i + k]] = Complex64::from_polar(1.0, angle);
            }
        }
    }
    Ok(b)
}

fn build_operator<R: Rng>(params: &ScenarioParams, rng: &mut R) -> Result<MixingOperator> {
    let (m1, n, i) = (params.m1, params.n, params.i);
    match params.case {
        MixingCase::Spatial => MixingOperator::spatial_only(complex_gaussian(rng, (m1, n)), i),
        MixingCase::Stft => {
            MixingOperator::time_invariant(complex_gaussian(rng, (m1, n)), stft_matrix(i)?)
        }
        MixingCase::PerSnapshot => MixingOperator::snapshot_selectors(
            (0..i).map(|_| complex_gaussian(rng, (m1, n))).collect(),
        ),
    }
}

/// Draw an instance. Operator, atoms and code values are standard complex
/// Gaussian; each code column has `L` nonzeros on a uniformly drawn support.
pub fn generate(params: &ScenarioParams, seed: u64) -> Result<Scenario> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let op = build_operator(params, &mut rng)?;
    let (n, p, i) = (params.n, params.p, params.i);
    let mut d_true = complex_gaussian(&mut rng, (n, p));
    if params.normalize_dict {
        normalize_columns(&mut d_true);
    }
    let mut z_true = CMat::zeros((p, i));
    for col in 0..i {
        for row in sample(&mut rng, p, params.l) {
            let v = complex_gaussian(&mut rng, (1, 1))[[0, 0]];
            z_true[[row, col]] = v;
        }
    }
    let x_true = d_true.dot(&z_true);
    let magnitude = op.apply_unchecked(&x_true).mapv(|v| v.norm());
    let (m1, m2) = op.output_dim();
    let noise = match params.finite_snr() {
        None => Array2::zeros((m1, m2)),
        Some(snr) => {
            let power: f64 = magnitude.iter().map(|v| v * v).sum();
            let sigma = (power / ((m1 * m2) as f64 * 10f64.powf(snr / 10.0))).sqrt();
            Array2::from_shape_simple_fn((m1, m2), || {
                sigma * rng.sample::<f64, _>(StandardNormal)
            })
        }
    };
    let y = (&magnitude + &noise).mapv(|v| v.max(0.0));
    let inst = ProblemInstance::new(y, Arc::new(op), p)?;
    Ok(Scenario {
        inst,
        d_true,
        z_true,
        x_true,
        noise,
        params: params.clone(),
        seed,
    })
}

/// Row-major matrix with a shape header; complex entries interleave re/im.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub complex: bool,
    pub data: Vec<f64>,
}

impl MatrixRecord {
    pub fn from_complex(a: &CMat) -> Self {
        let (rows, cols) = a.dim();
        let data = a.iter().flat_map(|v| [v.re, v.im]).collect();
        Self { rows, cols, complex: true, data }
    }

    pub fn from_real(a: &Array2<f64>) -> Self {
        let (rows, cols) = a.dim();
        Self { rows, cols, complex: false, data: a.iter().copied().collect() }
    }

    pub fn to_complex(&self) -> Result<CMat> {
        if !self.complex || self.data.len() != 2 * self.rows * self.cols {
            return Err(Error::Serde(format!(
                "expected {}×{} complex record",
                self.rows, self.cols
            )));
        }
        let vals = self
            .data
            .chunks_exact(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect();
        CMat::from_shape_vec((self.rows, self.cols), vals).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn to_real(&self) -> Result<Array2<f64>> {
        if self.complex || self.data.len() != self.rows * self.cols {
            return Err(Error::Serde(format!("expected {}×{} real record", self.rows, self.cols)));
        }
        Array2::from_shape_vec((self.rows, self.cols), self.data.clone())
            .map_err(|e| Error::Serde(e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    params: ScenarioParams,
    seed: u64,
    /// Spatial mixers; one for cases 1 and 2, `I` for case 3.
    mixers: Vec<MatrixRecord>,
    y: MatrixRecord,
    d_true: MatrixRecord,
    z_true: MatrixRecord,
    noise: MatrixRecord,
}

impl Scenario {
    pub fn to_json(&self) -> Result<String> {
        let file = ScenarioFile {
            params: self.params.clone(),
            seed: self.seed,
            mixers: self.inst.op().a_list().iter().map(MatrixRecord::from_complex).collect(),
            y: MatrixRecord::from_real(self.inst.y()),
            d_true: MatrixRecord::from_complex(&self.d_true),
            z_true: MatrixRecord::from_complex(&self.z_true),
            noise: MatrixRecord::from_real(&self.noise),
        };
        serde_json::to_string(&file).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
        file.params.validate()?;
        let mixers = file
            .mixers
            .iter()
            .map(MatrixRecord::to_complex)
            .collect::<Result<Vec<_>>>()?;
        let i = file.params.i;
        let op = match file.params.case {
            MixingCase::PerSnapshot => MixingOperator::snapshot_selectors(mixers)?,
            case => {
                let [a] = <[CMat; 1]>::try_from(mixers)
                    .map_err(|_| Error::Serde("expected exactly one mixer".into()))?;
                if case == MixingCase::Spatial {
                    MixingOperator::spatial_only(a, i)?
                } else {
                    MixingOperator::time_invariant(a, stft_matrix(i)?)?
                }
            }
        };
        let d_true = file.d_true.to_complex()?;
        let z_true = file.z_true.to_complex()?;
        let inst = ProblemInstance::new(file.y.to_real()?, Arc::new(op), file.params.p)?;
        inst.check_dz(&d_true, &z_true)?;
        Ok(Self {
            x_true: d_true.dot(&z_true),
            d_true,
            z_true,
            noise: file.noise.to_real()?,
            inst,
            params: file.params,
            seed: file.seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
