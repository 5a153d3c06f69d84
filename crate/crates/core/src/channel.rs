//! Channel synthesis: Rician fading with distance-based path loss, plus the
//! noise-normalized composite channels every rate formula works with.
//!
//! Conventions: a user receives `h^H s` from the transmit vector `s`, the
//! BS-RIS link is `N_S x N_B` (`y_ris = H s`), and the composite matrix of
//! user `k` is
//!
//! ```text
//! G_k = (1/sigma_k) [ conj(h_S,k[n]) * H[n, :]  for n < N_S ;  h_B,k^H ]
//! ```
//!
//! so that `v^H G_k s` is the noise-normalized received amplitude for the RIS
//! profile `v = conj([c; 1])`.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, CMatrix, CVector, C64};
use crate::metrics::StarProfile;
use crate::scenario::{stream_rng, Geometry, Region, SystemConfig};

pub const ARCHIVE_FORMAT: &str = "starisac-channels/1";

// NLoS draws are keyed by (link, user, element) so that a smaller surface sees
// exactly the leading rows of a larger one under the same seed.
const LINK_BS_RIS: u64 = 2;
const LINK_BS_CU: u64 = 3;
const LINK_RIS_CU: u64 = 4;

fn nlos_stream(link: u64, user: usize, element: usize) -> u64 {
    (link << 48) | ((user as u64) << 24) | element as u64
}

/// ULA response: entry `m` is `exp(i 2 pi sin(theta) spacing m)`.
pub fn steering_vector(theta: f64, n: usize, spacing: f64) -> CVector {
    let phase = 2.0 * std::f64::consts::PI * theta.sin() * spacing;
    CVector::from_fn(n, |m, _| C64::from_polar(1.0, phase * m as f64))
}

/// Rows x columns of the planar surface: rows is the largest divisor of `n`
/// not exceeding `sqrt(n)`.
pub fn upa_shape(n: usize) -> (usize, usize) {
    let mut rows = 1;
    let mut d = 1;
    while d * d <= n {
        if n.is_multiple_of(d) {
            rows = d;
        }
        d += 1;
    }
    (rows, n / rows)
}

/// Planar-array response for an in-plane direction (zero elevation).
///
/// Element `n` sits at row `n % rows`; with zero elevation the column index
/// contributes no phase.
pub fn upa_response(azimuth: f64, n: usize, spacing: f64) -> CVector {
    let (rows, _) = upa_shape(n);
    let phase = 2.0 * std::f64::consts::PI * azimuth.sin() * spacing;
    CVector::from_fn(n, |i, _| C64::from_polar(1.0, phase * (i % rows) as f64))
}

pub fn pathloss(distance_m: f64, exponent: f64, ref_gain: f64) -> Result<f64> {
    if !(distance_m >= 1.0) {
        return Err(Error::DistanceOutOfRange(distance_m));
    }
    Ok(ref_gain * distance_m.powf(-exponent))
}

/// `(sqrt(K/(K+1)), sqrt(1/(K+1)))`, with the pure-LoS limit for infinite K.
fn rician_weights(k: f64) -> (f64, f64) {
    if k.is_infinite() {
        (1.0, 0.0)
    } else {
        ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    /// `N_S x N_B`.
    pub h_bs_ris: CMatrix,
    pub h_bs_cu: Vec<CVector>,
    pub h_ris_cu: Vec<CVector>,
    pub h_bs_target: Vec<CVector>,
    /// Composite `(N_S+1) x N_B` matrices, noise-normalized.
    pub g_cu: Vec<CMatrix>,
    /// Noise-normalized target channels.
    pub g_target: Vec<CVector>,
    pub steer_target: Vec<CVector>,
    pub regions: Vec<Region>,
    /// `PL_j / sigma_s^2`, the factor between `g_j g_j^H` and `a_j a_j^H`.
    pub target_gain: Vec<f64>,
    pub noise_comm_std: f64,
    pub noise_sense_std: f64,
}

#[derive(Serialize, Deserialize)]
struct ChannelArchive {
    format: String,
    n_bs_antennas: usize,
    n_ris_elements: usize,
    n_comm_users: usize,
    n_sense_targets: usize,
    channels: ChannelSet,
}

impl ChannelSet {
    pub fn n_bs(&self) -> usize {
        self.h_bs_ris.ncols()
    }

    pub fn n_ris(&self) -> usize {
        self.h_bs_ris.nrows()
    }

    pub fn n_users(&self) -> usize {
        self.h_bs_cu.len()
    }

    pub fn n_targets(&self) -> usize {
        self.g_target.len()
    }

    /// Rebuilds the composite channels from the raw links and noise levels.
    pub fn assemble(&mut self) {
        let n_s = self.n_ris();
        let n_b = self.n_bs();
        let inv_c = 1.0 / self.noise_comm_std;
        self.g_cu = self
            .h_bs_cu
            .iter()
            .zip(&self.h_ris_cu)
            .map(|(h_b, h_s)| {
                let mut g = CMatrix::zeros(n_s + 1, n_b);
                for n in 0..n_s {
                    let row = self.h_bs_ris.row(n) * (h_s[n].conj() * inv_c);
                    g.set_row(n, &row);
                }
                g.set_row(n_s, &(h_b.adjoint() * C64::new(inv_c, 0.0)));
                g
            })
            .collect();
        let inv_s = 1.0 / self.noise_sense_std;
        self.g_target = self.h_bs_target.iter().map(|h| h * C64::new(inv_s, 0.0)).collect();
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let archive = ChannelArchive {
            format: ARCHIVE_FORMAT.to_string(),
            n_bs_antennas: self.n_bs(),
            n_ris_elements: self.n_ris(),
            n_comm_users: self.n_users(),
            n_sense_targets: self.n_targets(),
            channels: self.clone(),
        };
        std::fs::write(path, serde_json::to_vec(&archive)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let archive: ChannelArchive = serde_json::from_slice(&std::fs::read(path)?)?;
        if archive.format != ARCHIVE_FORMAT {
            return Err(Error::Parse(format!("unsupported channel archive `{}`", archive.format)));
        }
        let c = archive.channels;
        let shapes_ok = c.n_bs() == archive.n_bs_antennas
            && c.n_ris() == archive.n_ris_elements
            && c.n_users() == archive.n_comm_users
            && c.n_targets() == archive.n_sense_targets
            && c.g_cu.iter().all(|g| g.shape() == (c.n_ris() + 1, c.n_bs()));
        if !shapes_ok {
            return Err(Error::Parse("channel archive shapes disagree with its header".into()));
        }
        Ok(c)
    }
}

fn nlos_vector(seed: u64, link: u64, user: usize, len: usize) -> CVector {
    let mut rng = stream_rng(seed, nlos_stream(link, user, 0));
    CVector::from_fn(len, |_, _| complex_gaussian(&mut rng))
}

/// Draws one channel realization for the given layout.
pub fn sample_channels(config: &SystemConfig, geometry: &Geometry, seed: u64) -> Result<ChannelSet> {
    let n_b = config.n_bs_antennas;
    let n_s = config.n_ris_elements;
    let spacing = config.element_spacing_wavelengths;
    let (w_los, w_nlos) = rician_weights(config.rician_k());
    let pl_ref = config.pathloss_ref;
    let exp = config.pathloss_exp_default;

    // BS -> RIS
    let pl = pathloss(geometry.bs_ris_distance(), exp, pl_ref)?;
    let a_dep = steering_vector(geometry.bs_angle_to(geometry.ris_position), n_b, spacing);
    let b_arr = upa_response(geometry.ris_angle_to(geometry.bs_position), n_s, spacing);
    let los = &b_arr * a_dep.adjoint();
    let mut h_bs_ris = CMatrix::zeros(n_s, n_b);
    for n in 0..n_s {
        let mut rng = stream_rng(seed, nlos_stream(LINK_BS_RIS, 0, n));
        for m in 0..n_b {
            let nlos = complex_gaussian(&mut rng);
            h_bs_ris[(n, m)] = (los[(n, m)] * w_los + nlos * w_nlos) * pl.sqrt();
        }
    }

    let mut h_bs_cu = Vec::with_capacity(geometry.users.len());
    let mut h_ris_cu = Vec::with_capacity(geometry.users.len());
    for (k, user) in geometry.users.iter().enumerate() {
        let pl = pathloss(geometry.bs_cu_distance(k), config.pathloss_exp_bs_cu, pl_ref)?;
        let los = steering_vector(geometry.bs_angle_to(user.position), n_b, spacing);
        let nlos = nlos_vector(seed, LINK_BS_CU, k, n_b);
        h_bs_cu.push((los * C64::from(w_los) + nlos * C64::from(w_nlos)) * C64::from(pl.sqrt()));

        let pl = pathloss(geometry.ris_cu_distance(k), exp, pl_ref)?;
        let los = upa_response(geometry.ris_angle_to(user.position), n_s, spacing);
        let mut h = CVector::zeros(n_s);
        for n in 0..n_s {
            let mut rng = stream_rng(seed, nlos_stream(LINK_RIS_CU, k, n));
            h[n] = (los[n] * w_los + complex_gaussian(&mut rng) * w_nlos) * pl.sqrt();
        }
        h_ris_cu.push(h);
    }

    let mut h_bs_target = Vec::with_capacity(config.n_sense_targets);
    let mut steer_target = Vec::with_capacity(config.n_sense_targets);
    let mut target_gain = Vec::with_capacity(config.n_sense_targets);
    let noise_sense = config.noise_sense_w();
    for (j, &theta) in geometry.target_angles.iter().enumerate() {
        let pl = pathloss(geometry.target_distances[j], exp, pl_ref)?;
        let a = steering_vector(theta, n_b, spacing);
        h_bs_target.push(&a * C64::from(pl.sqrt()));
        steer_target.push(a);
        target_gain.push(pl / noise_sense);
    }

    let mut set = ChannelSet {
        h_bs_ris,
        h_bs_cu,
        h_ris_cu,
        h_bs_target,
        g_cu: Vec::new(),
        g_target: Vec::new(),
        steer_target,
        regions: geometry.user_regions(),
        target_gain,
        noise_comm_std: config.noise_comm_w().sqrt(),
        noise_sense_std: noise_sense.sqrt(),
    };
    set.assemble();
    Ok(set)
}

/// `G_k^H v_k`: the user's noise-normalized effective channel, so that the
/// received amplitude on beam `w` is `h^H w`.
pub fn effective_cu_channel(channels: &ChannelSet, star: &StarProfile, user: usize) -> CVector {
    let v = star.for_region(channels.regions[user]);
    channels.g_cu[user].adjoint() * v
}

/// Same quantity through the expanded cascade
/// `(h_B^H + c^T diag(h_S)^H H)^H / sigma` with `c = conj(v[..N_S])`.
pub fn effective_cu_channel_expanded(channels: &ChannelSet, star: &StarProfile, user: usize) -> CVector {
    let v = star.for_region(channels.regions[user]);
    let n_s = channels.n_ris();
    let h_s = &channels.h_ris_cu[user];
    let c: CVector = DVector::from_fn(n_s, |n, _| v[n].conj());
    let diag_hs_conj = CMatrix::from_diagonal(&h_s.map(|z| z.conj()));
    let row = channels.h_bs_cu[user].adjoint() + c.transpose() * diag_hs_conj * &channels.h_bs_ris;
    row.adjoint() * C64::from(1.0 / channels.noise_comm_std)
}
