//! Beam sweeping over DFT codebooks, beam reports, and least-squares
//! estimation of the stacked equivalent channel from orthogonal uplink pilots.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::beamforming::{
    stacked_equivalent_channel, transpose_mul, AnalogBeamformer, Association, BeamformerSet,
    EquivalentChannel, Side,
};
use crate::channel::{steering_from_cos, ArrayGeometry, SystemChannels};
use crate::error::{Error, Result};
use crate::numerics::{dot_h, ComplexMatrix, C64};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    vectors: Vec<Vec<C64>>,
    side: Side,
}

impl Codebook {
    pub fn vectors(&self) -> &[Vec<C64>] {
        &self.vectors
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// `oversampling·M` beams `(1/√M)·conj(a(c_n))` on the direction-cosine grid
/// `c_n = −1 + 2n/(oversampling·M)`.
pub fn dft_codebook(geometry: &ArrayGeometry, oversampling: usize, side: Side) -> Result<Codebook> {
    if oversampling == 0 {
        return Err(Error::InvalidParameter(
            "oversampling must be at least 1".into(),
        ));
    }
    let m = geometry.num_antennas();
    let size = oversampling * m;
    let scale = 1.0 / (m as f64).sqrt();
    let vectors = (0..size)
        .map(|n| {
            let c = -1.0 + 2.0 * n as f64 / size as f64;
            steering_from_cos(geometry, c)
                .into_iter()
                .map(|z| z.conj() * scale)
                .collect()
        })
        .collect();
    Ok(Codebook { vectors, side })
}

/// Best beam pair found on one SBS-user link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBeam {
    pub sbs: usize,
    pub sbs_beam: usize,
    pub user_beam: usize,
    /// Measured reference-signal power including noise.
    pub energy: f64,
}

/// What one user feeds back: its `N_D` selected links, in SBS order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamReport {
    pub user: usize,
    pub links: Vec<LinkBeam>,
}

/// Exhaustive sweep of every codebook pair on every link, measuring
/// `|w_userᴴ·Hᵀ·w_sbs·√E + n|²` with `n ~ CN(0, σ²)`. Each user then keeps
/// `n_d` links chosen by strongest measured power under the SBS budget of
/// `n_r` users.
#[allow(clippy::too_many_arguments)]
pub fn beam_sweep(
    channels: &SystemChannels,
    sbs_codebook: &Codebook,
    user_codebook: &Codebook,
    n_r: usize,
    n_d: usize,
    reference_energy: f64,
    noise_var: f64,
    rng: &mut SimRng,
) -> Result<Vec<BeamReport>> {
    if !(noise_var >= 0.0) || !(reference_energy >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sweep energy {reference_energy}, noise {noise_var}"
        )));
    }
    if sbs_codebook.is_empty() || user_codebook.is_empty() {
        return Err(Error::InvalidParameter("empty codebook".into()));
    }
    let (n, k_users) = (channels.n_sbs(), channels.n_users());
    let amp = reference_energy.sqrt();
    let noise_sd = noise_var.sqrt();
    let mut best = Vec::with_capacity(n * k_users);
    for i in 0..n {
        for k in 0..k_users {
            let h = &channels.get(i, k).matrix;
            let mut top = LinkBeam {
                sbs: i,
                sbs_beam: 0,
                user_beam: 0,
                energy: f64::NEG_INFINITY,
            };
            for (b, w_sbs) in sbs_codebook.vectors().iter().enumerate() {
                let y = transpose_mul(h, w_sbs)?;
                for (u, w_user) in user_codebook.vectors().iter().enumerate() {
                    let z = dot_h(w_user, &y) * amp + rng.complex_normal() * noise_sd;
                    let e = z.norm_sqr();
                    if e > top.energy {
                        top = LinkBeam {
                            sbs: i,
                            sbs_beam: b,
                            user_beam: u,
                            energy: e,
                        };
                    }
                }
            }
            best.push(top);
        }
    }
    let association =
        Association::strongest_links(n, k_users, n_r, n_d, |i, k| best[i * k_users + k].energy)?;
    Ok((0..k_users)
        .map(|k| BeamReport {
            user: k,
            links: association
                .serving(k)
                .iter()
                .map(|&i| best[i * k_users + k])
                .collect(),
        })
        .collect())
}

/// Analog beamformers and association built from fed-back beam reports.
pub fn beamformers_from_reports(
    reports: &[BeamReport],
    sbs_codebook: &Codebook,
    user_codebook: &Codebook,
    n_sbs: usize,
    n_r: usize,
) -> Result<BeamformerSet> {
    let serving: Vec<Vec<usize>> = reports
        .iter()
        .map(|r| r.links.iter().map(|l| l.sbs).collect())
        .collect();
    let association = Association::new(serving, n_sbs, n_r)?;
    let link_of = |user: usize, sbs: usize| -> &LinkBeam {
        reports[user]
            .links
            .iter()
            .find(|l| l.sbs == sbs)
            .expect("association built from the reports")
    };
    let sbs = (0..n_sbs)
        .map(|i| {
            let cols: Vec<Vec<C64>> = association
                .served(i)
                .iter()
                .map(|&k| sbs_codebook.vectors()[link_of(k, i).sbs_beam].clone())
                .collect();
            AnalogBeamformer::from_columns(&cols, Side::Sbs)
        })
        .collect::<Result<Vec<_>>>()?;
    let users = (0..reports.len())
        .map(|k| {
            let cols: Vec<Vec<C64>> = association
                .serving(k)
                .iter()
                .map(|&i| user_codebook.vectors()[link_of(k, i).user_beam].clone())
                .collect();
            AnalogBeamformer::from_columns(&cols, Side::User)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BeamformerSet {
        association,
        sbs,
        users,
        digital: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotMatrix {
    matrix: ComplexMatrix,
}

impl PilotMatrix {
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.rows() == 0
    }
}

/// `Φ[l, t] = e^{−j2π·l·t/L}`; row `l` is the pilot of user RF chain `l`.
pub fn orthogonal_pilots(length: usize) -> Result<PilotMatrix> {
    if length == 0 {
        return Err(Error::InvalidParameter(
            "pilot length must be at least 1".into(),
        ));
    }
    let l = length as f64;
    Ok(PilotMatrix {
        matrix: ComplexMatrix::from_fn(length, length, |r, t| {
            // Reduce the exponent first so large products keep full precision.
            let idx = (r * t) % length;
            C64::from_polar(1.0, -2.0 * PI * idx as f64 / l)
        }),
    })
}

/// Uplink pilot phase: every user RF chain sends its pilot row through the
/// given analog weights, the SBS RF chains observe
/// `Y = H̄·√E·Φᵀ + N` with `N ~ CN(0, σ²)` per entry, and the estimate is
/// `Ĥ = Y·Φ*/(L·√E)`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_stacked_channel(
    true_channels: &SystemChannels,
    f_sbs_all: &[AnalogBeamformer],
    f_user_all: &[AnalogBeamformer],
    pilots: &PilotMatrix,
    pilot_energy: f64,
    noise_var: f64,
    rng: &mut SimRng,
) -> Result<EquivalentChannel> {
    if !(pilot_energy > 0.0) || !(noise_var >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "pilot energy {pilot_energy}, noise {noise_var}"
        )));
    }
    let h_bar = stacked_equivalent_channel(true_channels, f_sbs_all, f_user_all)?;
    let (rows, cols) = h_bar.matrix.shape();
    let l = pilots.len();
    if l != cols {
        return Err(Error::Dimension(format!(
            "{l} pilots for {cols} user RF chains"
        )));
    }
    let amp = pilot_energy.sqrt();
    let sd = noise_var.sqrt();
    let phi = pilots.matrix();
    let mut y = h_bar.matrix.matmul(&phi.transpose())?.scale(amp);
    if sd > 0.0 {
        y = y.add(&ComplexMatrix::from_fn(rows, l, |_, _| {
            rng.complex_normal() * sd
        }))?;
    }
    let h_hat = y.matmul(&phi.conj())?.scale(1.0 / (l as f64 * amp));
    Ok(EquivalentChannel {
        matrix: h_hat,
        scope: h_bar.scope,
    })
}

/// `(N·N_R·K·N_D)·σ²/(L·E)`.
pub fn estimation_mse(
    n_rows: usize,
    n_cols: usize,
    pilot_len: usize,
    pilot_energy: f64,
    noise_var: f64,
) -> f64 {
    (n_rows * n_cols) as f64 * noise_var / (pilot_len as f64 * pilot_energy)
}
