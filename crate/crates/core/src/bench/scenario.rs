//! Synthetic stand-in for network predictions: posed surface samples with
//! depth-dependent bit flips, soft-value jitter, point noise, gross outliers
//! and dropped points.

use std::io::Write;
use std::path::Path;

use nalgebra::{Point3, UnitQuaternion, Vector3};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::correspondence::{read_correspondences, write_correspondences, Correspondence, SoftCode, Truth};
use crate::encoding::SurfaceEncoding;
use crate::solver::Pose;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_points: usize,
    /// Side of the cube translations are drawn from, mm.
    pub translation_box: f64,
    /// Camera-frame depth of the translation cube's center, mm.
    pub depth: f64,
    /// Flip probability of bit 0; later bits ramp linearly to `flip_last`.
    pub flip_first: f64,
    pub flip_last: f64,
    /// Std-dev of the soft-value pull toward 0.5 (capped at 0.5).
    pub code_jitter: f64,
    /// Std-dev of per-axis Gaussian point noise, mm.
    pub point_noise: f64,
    /// Fraction of points replaced by uniform points with random codes.
    pub outlier_fraction: f64,
    /// Fraction of points removed after corruption.
    pub drop_fraction: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_points: 2730,
            translation_box: 400.0,
            depth: 1000.0,
            flip_first: 0.01,
            flip_last: 0.30,
            code_jitter: 0.25,
            point_noise: 0.0,
            outlier_fraction: 0.2,
            drop_fraction: 0.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    /// Exact correspondences: no flips, jitter, noise, outliers or drops.
    pub fn noise_free() -> Self {
        ScenarioConfig {
            flip_first: 0.0,
            flip_last: 0.0,
            code_jitter: 0.0,
            point_noise: 0.0,
            outlier_fraction: 0.0,
            drop_fraction: 0.0,
            ..ScenarioConfig::default()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ScenarioConfig { seed, ..self.clone() }
    }

    /// Flip probability of bit `k` in a `bits`-deep code.
    pub fn flip_probability(&self, k: u32, bits: u32) -> f64 {
        if bits <= 1 {
            return self.flip_first;
        }
        self.flip_first + (self.flip_last - self.flip_first) * k as f64 / (bits - 1) as f64
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        let checks = [
            (self.n_points > 0, "n_points must be positive"),
            (
                prob(self.flip_first) && prob(self.flip_last),
                "flip probabilities must lie in [0, 1]",
            ),
            (
                self.flip_last >= self.flip_first,
                "flip schedule must be non-decreasing",
            ),
            (
                self.code_jitter >= 0.0 && self.point_noise >= 0.0,
                "noise levels must be >= 0",
            ),
            (
                (0.0..1.0).contains(&self.outlier_fraction),
                "outlier_fraction must lie in [0, 1)",
            ),
            (
                (0.0..1.0).contains(&self.drop_fraction),
                "drop_fraction must lie in [0, 1)",
            ),
            (self.translation_box >= 0.0, "translation_box must be >= 0"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(BenchError::Config((*msg).into())),
            None => Ok(()),
        }
    }
}

/// A generated scene with ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub pose: Pose,
    pub correspondences: Vec<Correspondence>,
    pub bits: u32,
    pub seed: u64,
}

const MAX_PULL: f64 = 0.5 - 1e-9;

// Independent RNG streams per corruption stage, so that changing one
// stage's magnitude leaves every other stage's draws unchanged.
const STREAM_POSE: u64 = 0;
const STREAM_PICK: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_CODE: u64 = 3;
const STREAM_OUTLIER: u64 = 4;
const STREAM_DROP: u64 = 5;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Uniform rotation (unit quaternion from three uniforms).
fn random_rotation(rng: &mut impl Rng) -> UnitQuaternion<f64> {
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
        b * (tau * u3).cos(),
        a * (tau * u2).sin(),
        a * (tau * u2).cos(),
        b * (tau * u3).sin(),
    ))
}

/// `diameter` sizes the box gross outliers are drawn from.
pub fn generate_scenario(enc: &SurfaceEncoding, diameter: f64, cfg: &ScenarioConfig) -> Result<Scenario, BenchError> {
    cfg.validate()?;
    let bits = enc.bits();
    let half_box = cfg.translation_box / 2.0;

    let mut rng = stream(cfg.seed, STREAM_POSE);
    let rotation = random_rotation(&mut rng);
    let translation = Vector3::new(
        rng.random_range(-half_box..=half_box),
        rng.random_range(-half_box..=half_box),
        cfg.depth + rng.random_range(-half_box..=half_box),
    );
    let pose = Pose::new(*rotation.to_rotation_matrix().matrix(), translation);

    let mut rng = stream(cfg.seed, STREAM_PICK);
    let picks: Vec<usize> = if cfg.n_points <= enc.len() {
        index::sample(&mut rng, enc.len(), cfg.n_points).into_vec()
    } else {
        (0..cfg.n_points).map(|_| rng.random_range(0..enc.len())).collect()
    };

    let mut noise_rng = stream(cfg.seed, STREAM_NOISE);
    let point_noise = Normal::new(0.0, cfg.point_noise).map_err(|e| BenchError::Config(e.to_string()))?;
    let mut code_rng = stream(cfg.seed, STREAM_CODE);
    let jitter = Normal::new(0.0, cfg.code_jitter).map_err(|e| BenchError::Config(e.to_string()))?;

    let mut corrs: Vec<Correspondence> = picks
        .iter()
        .map(|&v| {
            let mut point = pose.transform(&enc.vertices()[v]);
            for axis in 0..3 {
                point[axis] += point_noise.sample(&mut noise_rng);
            }
            let code = enc.code_of(v);
            let values = (0..bits)
                .map(|k| {
                    let mut bit = (code >> (bits - 1 - k)) & 1;
                    if code_rng.random::<f64>() < cfg.flip_probability(k, bits) {
                        bit ^= 1;
                    }
                    // Toward 0.5 but never onto it (0.5 quantizes to 1), so
                    // jitter alone does not flip a bit.
                    let pull = jitter.sample(&mut code_rng).abs().min(MAX_PULL);
                    if bit == 1 {
                        1.0 - pull
                    } else {
                        pull
                    }
                })
                .collect();
            Correspondence {
                point,
                code: SoftCode::new(values).expect("clamped soft code"),
                truth: Some(Truth::Vertex(v as u32)),
            }
        })
        .collect();

    let mut rng = stream(cfg.seed, STREAM_OUTLIER);
    let n_outliers = (cfg.outlier_fraction * corrs.len() as f64).round() as usize;
    let reach = half_box + diameter / 2.0;
    for i in index::sample(&mut rng, corrs.len(), n_outliers.min(corrs.len())) {
        let point = Point3::new(
            rng.random_range(-reach..=reach),
            rng.random_range(-reach..=reach),
            cfg.depth + rng.random_range(-reach..=reach),
        );
        let values = (0..bits).map(|_| rng.random::<f64>()).collect();
        corrs[i] = Correspondence {
            point,
            code: SoftCode::new(values).expect("uniform soft code"),
            truth: Some(Truth::Outlier),
        };
    }

    let mut rng = stream(cfg.seed, STREAM_DROP);
    let n_drop = (cfg.drop_fraction * corrs.len() as f64).round() as usize;
    if n_drop > 0 {
        let mut keep = vec![true; corrs.len()];
        for i in index::sample(&mut rng, corrs.len(), n_drop) {
            keep[i] = false;
        }
        let mut it = keep.iter();
        corrs.retain(|_| *it.next().unwrap());
    }

    Ok(Scenario {
        pose,
        correspondences: corrs,
        bits,
        seed: cfg.seed,
    })
}

/// Sidecar JSON stored next to a scenario's correspondence file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub pose: Pose,
    pub bits: u32,
    pub seed: u64,
}

pub fn save_scenario(
    scenario: &Scenario,
    corrs_path: impl AsRef<Path>,
    truth_path: impl AsRef<Path>,
) -> Result<(), BenchError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(corrs_path)?);
    write_correspondences(&mut file, &scenario.correspondences)?;
    file.flush()?;
    let truth = GroundTruth {
        pose: scenario.pose,
        bits: scenario.bits,
        seed: scenario.seed,
    };
    std::fs::write(truth_path, serde_json::to_string_pretty(&truth)? + "\n")?;
    Ok(())
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth, BenchError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

pub fn load_scenario(corrs_path: impl AsRef<Path>, truth_path: impl AsRef<Path>) -> Result<Scenario, BenchError> {
    let file = std::io::BufReader::new(std::fs::File::open(corrs_path)?);
    let correspondences = read_correspondences(file)?;
    let truth = load_ground_truth(truth_path)?;
    Ok(Scenario {
        pose: truth.pose,
        correspondences,
        bits: truth.bits,
        seed: truth.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correspondence::quantized_code;
    use crate::mesh::{upsample_mesh, TriangleMesh};

    fn enc() -> SurfaceEncoding {
        let mesh = TriangleMesh::cuboid(80.0, 50.0, 30.0).unwrap();
        SurfaceEncoding::build(upsample_mesh(&mesh, 10).unwrap().into_vertices(), 10, 0).unwrap()
    }

    #[test]
    fn noise_free_is_exact() {
        let enc = enc();
        let cfg = ScenarioConfig {
            n_points: 300,
            ..ScenarioConfig::noise_free()
        };
        let s = generate_scenario(&enc, 100.0, &cfg).unwrap();
        assert_eq!(s.correspondences.len(), 300);
        assert!(s.pose.is_rotation(1e-12));
        for c in &s.correspondences {
            let Some(Truth::Vertex(v)) = c.truth else {
                panic!("missing truth")
            };
            assert_eq!(quantized_code(&c.code), enc.code_of(v as usize));
            assert!(c.code.values().iter().all(|&x| x == 0.0 || x == 1.0));
            assert_eq!(c.point, s.pose.transform(&enc.vertices()[v as usize]));
        }
    }

    #[test]
    fn drop_fraction_count() {
        let enc = enc();
        let cfg = ScenarioConfig {
            drop_fraction: 0.2,
            ..ScenarioConfig::default()
        };
        let s = generate_scenario(&enc, 100.0, &cfg).unwrap();
        assert_eq!(s.correspondences.len(), 2184);
    }

    #[test]
    fn outlier_count_and_determinism() {
        let enc = enc();
        let cfg = ScenarioConfig::default().with_seed(42);
        let a = generate_scenario(&enc, 100.0, &cfg).unwrap();
        let b = generate_scenario(&enc, 100.0, &cfg).unwrap();
        assert_eq!(a, b);
        let outliers = a
            .correspondences
            .iter()
            .filter(|c| c.truth == Some(Truth::Outlier))
            .count();
        assert_eq!(outliers, 546);
        let c = generate_scenario(&enc, 100.0, &cfg.with_seed(43)).unwrap();
        assert_ne!(a.pose, c.pose);
    }

    #[test]
    fn point_noise_leaves_other_draws_alone() {
        let enc = enc();
        let clean = ScenarioConfig::default().with_seed(5);
        let noisy = ScenarioConfig {
            point_noise: 10.0,
            ..clean.clone()
        };
        let a = generate_scenario(&enc, 100.0, &clean).unwrap();
        let b = generate_scenario(&enc, 100.0, &noisy).unwrap();
        assert_eq!(a.pose, b.pose);
        for (x, y) in a.correspondences.iter().zip(&b.correspondences) {
            assert_eq!(x.code, y.code);
            assert_eq!(x.truth, y.truth);
        }
    }

    #[test]
    fn flip_schedule_ramps() {
        let cfg = ScenarioConfig::default();
        assert_eq!(cfg.flip_probability(0, 16), 0.01);
        assert!((cfg.flip_probability(15, 16) - 0.30).abs() < 1e-15);
        assert!(cfg.flip_probability(7, 16) < cfg.flip_probability(8, 16));
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            ScenarioConfig {
                outlier_fraction: 1.0,
                ..Default::default()
            },
            ScenarioConfig {
                flip_first: -0.1,
                ..Default::default()
            },
            ScenarioConfig {
                point_noise: -1.0,
                ..Default::default()
            },
            ScenarioConfig {
                flip_first: 0.5,
                flip_last: 0.1,
                ..Default::default()
            },
        ] {
            assert!(matches!(cfg.validate(), Err(BenchError::Config(_))));
        }
    }

    #[test]
    fn save_and_load() {
        let enc = enc();
        let s = generate_scenario(
            &enc,
            100.0,
            &ScenarioConfig {
                n_points: 50,
                ..Default::default()
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (cp, tp) = (dir.path().join("s.jsonl"), dir.path().join("s.gt.json"));
        save_scenario(&s, &cp, &tp).unwrap();
        let back = load_scenario(&cp, &tp).unwrap();
        assert_eq!(back, s);
    }
}
