//! Fading, SINR and coverage maps.
//!
//! Everything inside this module works in watts and metres. Conversions from
//! dB and dBm happen at the configuration boundary.

use std::f64::consts::PI;
use std::io::Write;

use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::geometry::Region;
use crate::{Error, Result, Seed, Vec2, Vec3};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1000.0).log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Thermal noise power over `bandwidth_hz` at -174 dBm/Hz plus a noise figure.
pub fn thermal_noise_watts(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    dbm_to_watts(-174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Nakagami shape.
    pub m: f64,
    /// Mean fading power.
    pub omega: f64,
    pub alpha_b: f64,
    pub alpha_al: f64,
    pub alpha_an: f64,
    pub env_a: f64,
    pub env_b: f64,
    /// Watts.
    pub noise_power: f64,
    /// Terrestrial path gain at 1 m.
    pub ref_gain: f64,
    /// Air-to-ground path gain at 1 m.
    pub aerial_ref_gain: f64,
    /// Weight on co-channel terrestrial interference; 1 is the plain sum.
    pub interference_factor: f64,
    /// Weight on interference between distinct aerial units; 0 leaves each
    /// unit noise-limited.
    pub aerial_interference_factor: f64,
}

impl Default for ChannelParams {
    /// Unit gains and noise, full interference.
    fn default() -> Self {
        ChannelParams {
            m: 3.0,
            omega: 1.0,
            alpha_b: 2.2,
            alpha_al: 2.0,
            alpha_an: 2.5,
            env_a: PI / 18.0,
            env_b: 0.11,
            noise_power: 1.0,
            ref_gain: 1.0,
            aerial_ref_gain: 1.0,
            interference_factor: 1.0,
            aerial_interference_factor: 0.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.m >= 0.5) {
            return Err(Error::param("m", format!("must be >= 0.5, got {}", self.m)));
        }
        if !(self.omega > 0.0) {
            return Err(Error::param("omega", "must be positive"));
        }
        if !(self.alpha_b > 2.0) {
            return Err(Error::param(
                "alpha_b",
                format!("must exceed 2, got {}", self.alpha_b),
            ));
        }
        if !(self.alpha_al > 0.0 && self.alpha_an > 0.0) {
            return Err(Error::param(
                "alpha_al",
                "aerial exponents must be positive",
            ));
        }
        if !(self.noise_power > 0.0) {
            return Err(Error::param("noise_power", "must be positive"));
        }
        if !(self.ref_gain > 0.0 && self.aerial_ref_gain > 0.0) {
            return Err(Error::param("ref_gain", "must be positive"));
        }
        if !(self.interference_factor >= 0.0 && self.aerial_interference_factor >= 0.0) {
            return Err(Error::param("interference_factor", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TxKind {
    Terrestrial,
    Aerial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transmitter {
    pub position: Vec3,
    /// Watts.
    pub tx_power: f64,
    pub kind: TxKind,
}

impl Transmitter {
    pub fn terrestrial(ground: Vec2, height: f64, tx_power: f64) -> Self {
        Transmitter {
            position: Vec3::new(ground.x, ground.y, height),
            tx_power,
            kind: TxKind::Terrestrial,
        }
    }
}

/// One or four aerial stations transmitting jointly to a user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AerialUnit {
    pub members: Vec<Vec3>,
    /// Watts per member.
    pub tx_power: f64,
}

/// Amplitude density of Nakagami-m fading.
pub fn nakagami_pdf(x: f64, m: f64, omega: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::param("x", format!("must be non-negative, got {x}")));
    }
    if !(m >= 0.5) {
        return Err(Error::param("m", format!("must be >= 0.5, got {m}")));
    }
    if !(omega > 0.0) {
        return Err(Error::param(
            "omega",
            format!("must be positive, got {omega}"),
        ));
    }
    let log_norm = 2f64.ln() + m * m.ln() - ln_gamma(m) - m * omega.ln();
    if x == 0.0 {
        return Ok(if m == 0.5 { log_norm.exp() } else { 0.0 });
    }
    Ok((log_norm + (2.0 * m - 1.0) * x.ln() - m * x * x / omega).exp())
}

fn power_gain_dist(m: f64, omega: f64) -> Result<Gamma<f64>> {
    if !(m >= 0.5) {
        return Err(Error::param("m", format!("must be >= 0.5, got {m}")));
    }
    if !(omega > 0.0) {
        return Err(Error::param(
            "omega",
            format!("must be positive, got {omega}"),
        ));
    }
    Gamma::new(m, omega / m).map_err(|e| Error::param("m", e.to_string()))
}

/// One fading power gain |h|^2 ~ Gamma(m, Ω/m).
pub fn sample_power_gain(m: f64, omega: f64, seed: Seed) -> Result<f64> {
    Ok(power_gain_dist(m, omega)?.sample(&mut seed.rng()))
}

/// `n` independent power gains from a single stream.
pub fn sample_power_gains(m: f64, omega: f64, n: usize, seed: Seed) -> Result<Vec<f64>> {
    let dist = power_gain_dist(m, omega)?;
    let mut rng = seed.rng();
    Ok((0..n).map(|_| dist.sample(&mut rng)).collect())
}

fn distance(a: &Vec3, b: &Vec3) -> Result<f64> {
    let d = (a - b).norm();
    if d > 0.0 {
        Ok(d)
    } else {
        Err(Error::InvalidGeometry(format!(
            "receiver coincides with transmitter at ({:.3}, {:.3}, {:.3})",
            b.x, b.y, b.z
        )))
    }
}

/// Terrestrial server with the strongest mean received power, ties to the
/// lowest index.
pub fn serving_index(rx: &Vec3, bs: &[Transmitter], params: &ChannelParams) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, t) in bs.iter().enumerate() {
        let p = t.tx_power * (rx - t.position).norm().powf(-params.alpha_b);
        if best.is_none_or(|(_, bp)| p > bp) {
            best = Some((i, p));
        }
    }
    best.map(|(i, _)| i)
}

/// SINR at a receiver served by `bs[serving]`, with one fading power gain per
/// transmitter.
pub fn sinr_c2a(
    rx: &Vec3,
    bs: &[Transmitter],
    serving: usize,
    params: &ChannelParams,
    fading: &[f64],
) -> Result<f64> {
    if serving >= bs.len() {
        return Err(Error::param(
            "serving_index",
            format!("{serving} out of range for {} transmitters", bs.len()),
        ));
    }
    if fading.len() != bs.len() {
        return Err(Error::param(
            "fading",
            format!("expected {} gains, got {}", bs.len(), fading.len()),
        ));
    }
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (i, (t, g)) in bs.iter().zip(fading).enumerate() {
        let d = distance(rx, &t.position)?;
        let p = t.tx_power * g * params.ref_gain * d.powf(-params.alpha_b);
        if i == serving {
            signal = p;
        } else {
            interference += p;
        }
    }
    Ok(signal / (params.interference_factor * interference + params.noise_power))
}

/// Mean-fading terrestrial SINR with the strongest server; 0 with no BSs.
pub fn terrestrial_sinr(rx: &Vec3, bs: &[Transmitter], params: &ChannelParams) -> Result<f64> {
    match serving_index(rx, bs, params) {
        None => Ok(0.0),
        Some(s) => {
            let fading = vec![params.omega; bs.len()];
            sinr_c2a(rx, bs, s, params, &fading)
        }
    }
}

fn unit_received_power(ue: &Vec3, unit: &AerialUnit, params: &ChannelParams) -> Result<f64> {
    let mut sum = 0.0;
    for m in &unit.members {
        let d = distance(ue, m)?;
        sum += params.aerial_ref_gain * d.powf(-params.alpha_al);
    }
    Ok(unit.tx_power * sum)
}

/// Noise-limited SINR from one aerial unit, summing the members' LoS power
/// gains.
pub fn sinr_a2g(ue: &Vec3, unit: &AerialUnit, params: &ChannelParams) -> Result<f64> {
    Ok(unit_received_power(ue, unit, params)? / params.noise_power)
}

/// SINR from the best of several aerial units, with the remaining units
/// weighted by `aerial_interference_factor`.
pub fn aerial_sinr(ue: &Vec3, units: &[AerialUnit], params: &ChannelParams) -> Result<f64> {
    let mut total = 0.0;
    let mut best = 0.0f64;
    for u in units {
        let p = unit_received_power(ue, u, params)?;
        total += p;
        best = best.max(p);
    }
    if units.is_empty() {
        return Ok(0.0);
    }
    Ok(best / (params.aerial_interference_factor * (total - best) + params.noise_power))
}

/// Line-of-sight probability at elevation `elevation_deg`.
pub fn los_probability(elevation_deg: f64, env_a: f64, env_b: f64) -> f64 {
    1.0 / (1.0 + env_a * (-env_b * (elevation_deg - env_a)).exp())
}

/// Ground radius within which a single station at altitude `h` delivers at
/// least `gamma`.
pub fn coverage_radius_single(
    p: f64,
    gamma: f64,
    noise: f64,
    alpha: f64,
    h: f64,
    ref_gain: f64,
) -> Result<f64> {
    if !(p > 0.0 && gamma > 0.0 && noise > 0.0 && alpha > 0.0 && ref_gain > 0.0) {
        return Err(Error::param(
            "coverage_radius_single",
            "inputs must be positive",
        ));
    }
    let reach_sq = (ref_gain * p / (gamma * noise)).powf(2.0 / alpha);
    let bracket = reach_sq - h * h;
    if bracket < 0.0 {
        if -bracket <= 1e-12 * reach_sq {
            return Ok(0.0);
        }
        return Err(Error::InfeasibleAltitude {
            altitude: h,
            max_feasible: reach_sq.sqrt(),
        });
    }
    Ok(bracket.sqrt())
}

/// Effective radius of a tetrahedral swarm whose apex flies at `h_a` above a
/// base at `h_b`.
pub fn coverage_radius_swarm(r1: f64, h_a: f64, h_b: f64) -> Result<f64> {
    if !(h_a > h_b) {
        return Err(Error::param(
            "h_a",
            format!("apex {h_a} m must be above base {h_b} m"),
        ));
    }
    Ok(r1 + std::f64::consts::FRAC_1_SQRT_2 * (h_a - h_b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum FadingMode {
    /// Every gain at its mean Ω.
    Mean,
    /// Average SINR over `count` independent fading draws.
    Sampled { count: usize, seed: Seed },
}

/// Gridded SINR field. Row `iy` holds cells with centre
/// `y = origin.y + (iy + 0.5) * resolution`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageMap {
    pub origin: Vec2,
    pub resolution: f64,
    pub nx: usize,
    pub ny: usize,
    /// Linear SINR threshold.
    pub threshold: f64,
    /// Linear SINR, row-major.
    pub sinr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub coverage_fraction: f64,
    pub threshold_db: f64,
    pub cells: usize,
    /// (percentile, SINR in dB).
    pub sinr_db_percentiles: Vec<(u8, f64)>,
}

impl CoverageMap {
    pub fn cell_center(&self, ix: usize, iy: usize) -> Vec2 {
        self.origin
            + Vec2::new(
                (ix as f64 + 0.5) * self.resolution,
                (iy as f64 + 0.5) * self.resolution,
            )
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.sinr[iy * self.nx + ix]
    }

    pub fn coverage_fraction(&self) -> f64 {
        if self.sinr.is_empty() {
            return 0.0;
        }
        let covered = self.sinr.iter().filter(|&&s| s >= self.threshold).count();
        covered as f64 / self.sinr.len() as f64
    }

    pub fn summary(&self) -> CoverageSummary {
        let mut db: Vec<f64> = self.sinr.iter().map(|&s| linear_to_db(s)).collect();
        db.sort_by(f64::total_cmp);
        let pct = |q: f64| -> f64 {
            if db.is_empty() {
                return f64::NAN;
            }
            let idx = ((db.len() - 1) as f64 * q).round() as usize;
            db[idx]
        };
        CoverageSummary {
            coverage_fraction: self.coverage_fraction(),
            threshold_db: linear_to_db(self.threshold),
            cells: self.sinr.len(),
            sinr_db_percentiles: [5u8, 10, 25, 50, 75, 90, 95]
                .iter()
                .map(|&p| (p, pct(p as f64 / 100.0)))
                .collect(),
        }
    }

    /// Writes a comment line with the grid metadata followed by `ny` rows of
    /// `nx` linear SINR values, lowest `y` first.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# origin_x={},origin_y={},resolution={},threshold={},nx={},ny={}",
            self.origin.x, self.origin.y, self.resolution, self.threshold, self.nx, self.ny
        )?;
        let mut cw = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        for row in self.sinr.chunks(self.nx.max(1)) {
            cw.write_record(row.iter().map(|v| format!("{v:.6e}")))?;
        }
        cw.flush()?;
        Ok(())
    }
}

/// Per-cell SINR over `region` at height `rx_height`. Each cell takes the
/// better of its terrestrial and aerial SINR; aerial units use a separate band.
#[allow(clippy::too_many_arguments)]
pub fn build_coverage_map(
    region: &Region,
    bs: &[Transmitter],
    units: &[AerialUnit],
    params: &ChannelParams,
    threshold: f64,
    resolution: f64,
    rx_height: f64,
    fading: FadingMode,
) -> Result<CoverageMap> {
    if !(resolution > 0.0) {
        return Err(Error::param(
            "resolution",
            format!("must be positive, got {resolution}"),
        ));
    }
    let nx = (region.width / resolution).ceil() as usize;
    let ny = (region.height / resolution).ceil() as usize;
    let mut map = CoverageMap {
        origin: region.origin,
        resolution,
        nx,
        ny,
        threshold,
        sinr: Vec::new(),
    };
    let gains = match fading {
        FadingMode::Sampled { .. } => Some(power_gain_dist(params.m, params.omega)?),
        FadingMode::Mean => None,
    };
    let cells: Result<Vec<f64>> = (0..nx * ny)
        .into_par_iter()
        .map(|c| {
            let ground = map.cell_center(c % nx, c / nx);
            let rx = Vec3::new(ground.x, ground.y, rx_height);
            let t = match (fading, &gains) {
                (FadingMode::Sampled { count, seed }, Some(dist)) if !bs.is_empty() => {
                    let serving = serving_index(&rx, bs, params).expect("non-empty");
                    let mut rng = seed.derive(c as u64).rng();
                    let mut acc = 0.0;
                    let mut g = vec![0.0; bs.len()];
                    for _ in 0..count.max(1) {
                        g.iter_mut().for_each(|x| *x = dist.sample(&mut rng));
                        acc += sinr_c2a(&rx, bs, serving, params, &g)?;
                    }
                    acc / count.max(1) as f64
                }
                _ => terrestrial_sinr(&rx, bs, params)?,
            };
            let a = aerial_sinr(&rx, units, params)?;
            Ok(t.max(a))
        })
        .collect();
    map.sinr = cells?;
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rayleigh_special_case() {
        let v = nakagami_pdf(1.0, 1.0, 1.0).unwrap();
        assert!((v - 2.0 * (-1f64).exp()).abs() < 1e-12);
        assert_eq!(nakagami_pdf(0.0, 3.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn empty_transmitters_give_zero_map() {
        let r = Region::square(30.0).unwrap();
        let p = ChannelParams::default();
        let m = build_coverage_map(&r, &[], &[], &p, 1.0, 10.0, 1.5, FadingMode::Mean).unwrap();
        assert_eq!((m.nx, m.ny), (3, 3));
        assert!(m.sinr.iter().all(|&s| s == 0.0));
    }
}
