//! Reproducible probe fields, stored by their eigen-coefficients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::grid::Field;
use crate::partition::phi0;
use crate::spectral::SpectralDecomposition;

pub const DEFAULT_SEED: u64 = 0x5eed_b350;
pub const DEFAULT_SIZE: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum ProbeKind {
    /// i.i.d. standard normal coefficients.
    Gaussian(usize),
    /// The `k`-th eigenvector.
    Eigenmode(usize),
    /// `phi0(2^-sigma sqrt A) delta_x`, a wave packet at frequency `2^sigma`.
    Packet { sigma: f64, cell: usize },
    /// The unit-mass point source `delta_x`, the extremal input for
    /// `L^1`-type norms.
    PointSource(usize),
}

#[derive(Debug, Clone)]
pub struct Probe {
    pub kind: ProbeKind,
    pub coeffs: Vec<f64>,
}

impl Probe {
    pub fn label(&self) -> String {
        match &self.kind {
            ProbeKind::Gaussian(i) => format!("gaussian[{i}]"),
            ProbeKind::Eigenmode(k) => format!("mode[{k}]"),
            ProbeKind::Packet { sigma, cell } => format!("packet[{sigma},{cell}]"),
            ProbeKind::PointSource(cell) => format!("delta[{cell}]"),
        }
    }

    pub fn field(&self, dec: &SpectralDecomposition) -> Field {
        dec.synthesize(&self.coeffs)
    }
}

pub fn gaussian_probes(n: usize, count: usize, seed: u64) -> Vec<Probe> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| Probe {
            kind: ProbeKind::Gaussian(i),
            coeffs: (0..n).map(|_| StandardNormal.sample(&mut rng)).collect(),
        })
        .collect()
}

pub fn eigenmode_probes(n: usize) -> Vec<Probe> {
    (0..n)
        .map(|k| {
            let mut c = vec![0.0; n];
            c[k] = 1.0;
            Probe { kind: ProbeKind::Eigenmode(k), coeffs: c }
        })
        .collect()
}

/// Wave packets at the central cell for `sigma` on a quarter-dyadic grid
/// covering the spectrum.
pub fn packet_probes(dec: &SpectralDecomposition) -> Vec<Probe> {
    let cell = dec.domain().central_cell();
    let lo = (dec.lambda_min().sqrt().log2() * 4.0).floor() as i32 - 4;
    let hi = (dec.lambda_max().sqrt().log2() * 4.0).ceil() as i32 + 4;
    (lo..=hi)
        .filter_map(|i| {
            let sigma = i as f64 / 4.0;
            let scale = 2f64.powf(-sigma);
            // <delta_x, v_k> = v_k(x), since delta_x has mass one
            let coeffs: Vec<f64> =
                (0..dec.n()).map(|k| phi0(scale * dec.eigenvalues()[k].sqrt()) * dec.vector(k)[cell]).collect();
            coeffs.iter().any(|&c| c != 0.0).then_some(Probe { kind: ProbeKind::Packet { sigma, cell }, coeffs })
        })
        .collect()
}

pub fn point_source_probe(dec: &SpectralDecomposition, cell: usize) -> Probe {
    let coeffs = (0..dec.n()).map(|k| dec.vector(k)[cell]).collect();
    Probe { kind: ProbeKind::PointSource(cell), coeffs }
}

/// Gaussian fields, every eigenmode, the wave packets and the point source
/// at the central cell.
pub fn standard_ensemble(dec: &SpectralDecomposition, size: usize, seed: u64) -> Vec<Probe> {
    let mut out = gaussian_probes(dec.n(), size, seed);
    out.extend(eigenmode_probes(dec.n()));
    out.extend(packet_probes(dec));
    out.push(point_source_probe(dec, dec.domain().central_cell()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{assemble_laplacian, build_domain, GridSpec};
    use crate::spectral::decompose;

    #[test]
    fn seeded_and_reproducible() {
        let a = gaussian_probes(10, 3, 7);
        let b = gaussian_probes(10, 3, 7);
        let c = gaussian_probes(10, 3, 8);
        assert_eq!(a[2].coeffs, b[2].coeffs);
        assert_ne!(a[0].coeffs, c[0].coeffs);
    }

    #[test]
    fn packet_matches_functional_calculus() {
        let d = build_domain(GridSpec::unit_interval(31).unwrap()).unwrap();
        let dec = decompose(&assemble_laplacian(&d)).unwrap();
        let probes = packet_probes(&dec);
        assert!(!probes.is_empty());
        let p = &probes[probes.len() / 2];
        let ProbeKind::Packet { sigma, cell } = p.kind else { panic!() };
        let delta: Field = Field::point_source(d.clone(), cell);
        let direct = dec.apply_function(|l| phi0(2f64.powf(-sigma) * l.sqrt()), &delta).unwrap();
        let via = p.field(&dec);
        for (a, b) in direct.values().iter().zip(via.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn point_source_round_trip() {
        let d = build_domain(GridSpec::unit_interval(15).unwrap()).unwrap();
        let dec = decompose(&assemble_laplacian(&d)).unwrap();
        let p = point_source_probe(&dec, 4);
        let delta: Field = Field::point_source(d.clone(), 4);
        for (a, b) in p.field(&dec).values().iter().zip(delta.values()) {
            assert!((a - b).abs() < 1e-9 * b.abs().max(1.0));
        }
    }
}
