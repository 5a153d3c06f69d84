//! Scenario configuration, unit conversions, seeding and 2-D geometry.
//!
//! Coordinates are metres in a plane. The BS array broadside points along +x,
//! so the angle of a point seen from the BS is `atan2(dy, dx)`. The STAR-RIS
//! plane is perpendicular to the BS-RIS line: points on the BS side belong to
//! the reflection region, points beyond the surface to the transmission region.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// RNG stream used for user placement; channel links use their own streams.
pub(crate) const GEOMETRY_STREAM: u64 = 1;

/// Default target bearings (degrees) handed out when the target count changes.
const DEFAULT_TARGET_ANGLES_DEG: [f64; 6] = [30.0, -30.0, 0.0, 60.0, -60.0, 15.0];

pub fn db_to_linear(value_db: f64) -> f64 {
    10f64.powf(value_db / 10.0)
}

pub fn linear_to_db(value: f64) -> f64 {
    10.0 * value.log10()
}

pub fn dbm_to_watts(value_dbm: f64) -> f64 {
    db_to_linear(value_dbm) / 1000.0
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    linear_to_db(watts * 1000.0)
}

/// Maps `(master_seed, run_index)` to a per-run seed.
///
/// Both stages are bijections on `u64`, so distinct indices never collide under
/// one master seed.
pub fn derive_run_seed(master_seed: u64, run_index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(run_index))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic RNG for one `(seed, stream)` pair.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    #[serde(rename = "T")]
    Transmission,
    #[serde(rename = "R")]
    Reflection,
}

/// Fixed (non-random) part of the layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub bs_position: [f64; 2],
    pub ris_position: [f64; 2],
    /// Users are dropped uniformly in a disc of this radius around the RIS.
    pub cu_radius_m: f64,
    /// Users closer than this to the RIS are redrawn (path loss is defined from 1 m).
    pub min_cu_distance_m: f64,
    /// Target bearings from the BS; radians in memory, degrees on disk.
    #[serde(rename = "target_angles_deg", with = "degrees")]
    pub target_angles: Vec<f64>,
    /// One entry per target, or a single entry shared by all targets.
    pub target_distances_m: Vec<f64>,
    /// Reuse the geometry of run 0 for every run of a sweep.
    pub freeze_users: bool,
}

mod degrees {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(rad: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let deg: Vec<f64> = rad.iter().map(|r| r.to_degrees()).collect();
        deg.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let deg = Vec::<f64>::deserialize(d)?;
        Ok(deg.into_iter().map(f64::to_radians).collect())
    }
}

/// Omitted fields in a config file take their [`SystemConfig::paper_default`] values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub n_bs_antennas: usize,
    pub n_ris_elements: usize,
    pub n_comm_users: usize,
    pub n_sense_targets: usize,
    pub power_budget_dbm: f64,
    pub noise_comm_dbm: f64,
    pub noise_sense_dbm: f64,
    /// Required fraction of the sensing-only gain, per target (or one shared value).
    pub beampattern_ratio_db: Vec<f64>,
    pub rician_k_db: f64,
    pub pathloss_ref: f64,
    pub pathloss_exp_default: f64,
    pub pathloss_exp_bs_cu: f64,
    pub element_spacing_wavelengths: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub master_seed: u64,
    pub geometry: GeometryConfig,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::paper_default()
    }
}

impl Default for GeometryConfig {
    fn default() -> Self {
        SystemConfig::paper_default().geometry
    }
}

impl SystemConfig {
    /// Every value of the published simulation setup.
    pub fn paper_default() -> Self {
        Self {
            n_bs_antennas: 8,
            n_ris_elements: 32,
            n_comm_users: 6,
            n_sense_targets: 2,
            power_budget_dbm: 30.0,
            noise_comm_dbm: -80.0,
            noise_sense_dbm: -80.0,
            beampattern_ratio_db: vec![-1.0],
            rician_k_db: 5.0,
            pathloss_ref: 1e-3,
            pathloss_exp_default: 2.2,
            pathloss_exp_bs_cu: 4.0,
            element_spacing_wavelengths: 0.5,
            max_iters: 20,
            tol: 1e-4,
            master_seed: 2025,
            geometry: GeometryConfig {
                bs_position: [0.0, 0.0],
                ris_position: [30.0, 30.0],
                cu_radius_m: 10.0,
                min_cu_distance_m: 1.0,
                target_angles: vec![30f64.to_radians(), (-30f64).to_radians()],
                target_distances_m: vec![50.0],
                freeze_users: false,
            },
        }
    }

    /// Reduced problem size used for quick experiments and the test suite.
    pub fn desk() -> Self {
        Self { n_bs_antennas: 4, n_ris_elements: 8, n_comm_users: 2, ..Self::paper_default() }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper-default" | "paper" => Ok(Self::paper_default()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::Unknown { kind: "preset", name: other.to_string() }),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_bs_antennas == 0 || self.n_ris_elements == 0 || self.n_comm_users == 0 || self.n_sense_targets == 0 {
            return bad("antenna, element, user and target counts must all be >= 1".into());
        }
        if !self.n_ris_elements.is_multiple_of(2) {
            return bad(format!("n_ris_elements must be even (got {})", self.n_ris_elements));
        }
        if !(self.power_budget_w() > 0.0) || !self.power_budget_w().is_finite() {
            return bad("power budget must be positive and finite".into());
        }
        if !(self.tol > 0.0) {
            return bad("tol must be > 0".into());
        }
        if self.max_iters == 0 {
            return bad("max_iters must be >= 1".into());
        }
        let k_s = self.n_sense_targets;
        if self.beampattern_ratio_db.len() != 1 && self.beampattern_ratio_db.len() != k_s {
            return bad("beampattern_ratio_db needs one entry or one per target".into());
        }
        for j in 0..k_s {
            let eta = self.beampattern_ratio(j);
            if !(eta > 0.0 && eta < 1.0) {
                return bad(format!("beampattern ratio of target {j} must lie in (0, 1), got {eta}"));
            }
        }
        let g = &self.geometry;
        if g.target_angles.len() != k_s {
            return bad(format!("expected {k_s} target angles, got {}", g.target_angles.len()));
        }
        if g.target_distances_m.len() != 1 && g.target_distances_m.len() != k_s {
            return bad("target_distances_m needs one entry or one per target".into());
        }
        if g.target_distances_m.iter().any(|&d| d < 1.0) {
            return bad("target distances must be >= 1 m".into());
        }
        if !(g.cu_radius_m > g.min_cu_distance_m) || g.min_cu_distance_m < 1.0 {
            return bad("need cu_radius_m > min_cu_distance_m >= 1".into());
        }
        let d = [g.ris_position[0] - g.bs_position[0], g.ris_position[1] - g.bs_position[1]];
        if d[0].hypot(d[1]) < 1.0 {
            return bad("BS and RIS must be at least 1 m apart".into());
        }
        if self.element_spacing_wavelengths <= 0.0 || self.pathloss_ref <= 0.0 {
            return bad("element spacing and reference path loss must be positive".into());
        }
        Ok(())
    }

    pub fn power_budget_w(&self) -> f64 {
        dbm_to_watts(self.power_budget_dbm)
    }

    pub fn noise_comm_w(&self) -> f64 {
        dbm_to_watts(self.noise_comm_dbm)
    }

    pub fn noise_sense_w(&self) -> f64 {
        dbm_to_watts(self.noise_sense_dbm)
    }

    /// Linear beampattern ratio for target `j`.
    pub fn beampattern_ratio(&self, j: usize) -> f64 {
        let v = &self.beampattern_ratio_db;
        db_to_linear(if v.len() == 1 { v[0] } else { v[j] })
    }

    pub fn rician_k(&self) -> f64 {
        db_to_linear(self.rician_k_db)
    }

    pub fn target_distance(&self, j: usize) -> f64 {
        let v = &self.geometry.target_distances_m;
        if v.len() == 1 {
            v[0]
        } else {
            v[j]
        }
    }

    /// Changes the target count, filling angles from the default bearing list
    /// and broadcasting per-target lists that were shared.
    pub fn set_sense_targets(&mut self, k_s: usize) {
        self.n_sense_targets = k_s;
        let angles = &mut self.geometry.target_angles;
        while angles.len() < k_s {
            let next = DEFAULT_TARGET_ANGLES_DEG[angles.len() % DEFAULT_TARGET_ANGLES_DEG.len()];
            angles.push(next.to_radians());
        }
        angles.truncate(k_s);
        if self.beampattern_ratio_db.len() != 1 {
            let first = self.beampattern_ratio_db[0];
            self.beampattern_ratio_db.resize(k_s, first);
        }
        if self.geometry.target_distances_m.len() != 1 {
            let first = self.geometry.target_distances_m[0];
            self.geometry.target_distances_m.resize(k_s, first);
        }
    }

    /// Number of users placed in the transmission / reflection regions.
    pub fn region_counts(&self) -> (usize, usize) {
        let k = self.n_comm_users;
        (k.div_ceil(2), k / 2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserPlacement {
    pub position: [f64; 2],
    pub region: Region,
}

/// One realization of the node layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub bs_position: [f64; 2],
    pub ris_position: [f64; 2],
    pub users: Vec<UserPlacement>,
    pub target_angles: Vec<f64>,
    pub target_distances: Vec<f64>,
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

impl Geometry {
    /// Unit normal of the RIS plane, pointing away from the BS.
    pub fn ris_normal(&self) -> [f64; 2] {
        let d = sub(self.ris_position, self.bs_position);
        let n = norm(d);
        [d[0] / n, d[1] / n]
    }

    pub fn region_of(&self, point: [f64; 2]) -> Option<Region> {
        let n = self.ris_normal();
        let d = sub(point, self.ris_position);
        let side = d[0] * n[0] + d[1] * n[1];
        if side > 0.0 {
            Some(Region::Transmission)
        } else if side < 0.0 {
            Some(Region::Reflection)
        } else {
            None
        }
    }

    pub fn bs_ris_distance(&self) -> f64 {
        norm(sub(self.ris_position, self.bs_position))
    }

    pub fn bs_cu_distance(&self, k: usize) -> f64 {
        norm(sub(self.users[k].position, self.bs_position))
    }

    pub fn ris_cu_distance(&self, k: usize) -> f64 {
        norm(sub(self.users[k].position, self.ris_position))
    }

    /// Bearing of `point` relative to the BS array broadside (+x).
    pub fn bs_angle_to(&self, point: [f64; 2]) -> f64 {
        let d = sub(point, self.bs_position);
        d[1].atan2(d[0])
    }

    /// Bearing of `point` relative to the RIS normal, measured in the plane.
    ///
    /// Only the sine enters the array response, so the two faces of the
    /// surface share one angle convention.
    pub fn ris_angle_to(&self, point: [f64; 2]) -> f64 {
        let n = self.ris_normal();
        let t = [-n[1], n[0]];
        let d = sub(point, self.ris_position);
        let along = d[0] * t[0] + d[1] * t[1];
        (along / norm(d)).clamp(-1.0, 1.0).asin()
    }

    pub fn user_regions(&self) -> Vec<Region> {
        self.users.iter().map(|u| u.region).collect()
    }
}

/// Drops users uniformly in the disc around the RIS until each region holds its
/// quota; targets sit at the configured bearings and ranges from the BS.
pub fn sample_geometry(config: &SystemConfig, seed: u64) -> Result<Geometry> {
    config.validate()?;
    let g = &config.geometry;
    let mut geometry = Geometry {
        bs_position: g.bs_position,
        ris_position: g.ris_position,
        users: Vec::with_capacity(config.n_comm_users),
        target_angles: g.target_angles.clone(),
        target_distances: (0..config.n_sense_targets).map(|j| config.target_distance(j)).collect(),
    };

    let (need_t, need_r) = config.region_counts();
    let mut t_users = Vec::with_capacity(need_t);
    let mut r_users = Vec::with_capacity(need_r);
    let mut rng = stream_rng(seed, GEOMETRY_STREAM);
    let max_attempts = 10_000 * config.n_comm_users;
    let mut attempts = 0;
    while t_users.len() < need_t || r_users.len() < need_r {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::DegenerateGeometry {
                attempts: max_attempts,
                reason: format!(
                    "placed {}/{} transmission and {}/{} reflection users",
                    t_users.len(),
                    need_t,
                    r_users.len(),
                    need_r
                ),
            });
        }
        let radius = g.cu_radius_m * rng.random::<f64>().sqrt();
        if radius < g.min_cu_distance_m {
            continue;
        }
        let phi = 2.0 * PI * rng.random::<f64>();
        let p = [g.ris_position[0] + radius * phi.cos(), g.ris_position[1] + radius * phi.sin()];
        if norm(sub(p, g.bs_position)) < 1.0 {
            continue;
        }
        match geometry.region_of(p) {
            Some(Region::Transmission) if t_users.len() < need_t => {
                t_users.push(UserPlacement { position: p, region: Region::Transmission })
            }
            Some(Region::Reflection) if r_users.len() < need_r => {
                r_users.push(UserPlacement { position: p, region: Region::Reflection })
            }
            _ => {}
        }
    }
    geometry.users.extend(t_users);
    geometry.users.extend(r_users);
    Ok(geometry)
}
