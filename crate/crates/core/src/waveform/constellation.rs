use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsp::C64;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstellationLabel {
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "8PSK")]
    Psk8,
    #[serde(rename = "16APSK")]
    Apsk16,
    #[serde(rename = "32APSK")]
    Apsk32,
    #[serde(rename = "64APSK")]
    Apsk64,
}

impl ConstellationLabel {
    pub const ALL: [ConstellationLabel; 5] = [
        ConstellationLabel::Qpsk,
        ConstellationLabel::Psk8,
        ConstellationLabel::Apsk16,
        ConstellationLabel::Apsk32,
        ConstellationLabel::Apsk64,
    ];

    pub fn order(self) -> usize {
        match self {
            ConstellationLabel::Qpsk => 4,
            ConstellationLabel::Psk8 => 8,
            ConstellationLabel::Apsk16 => 16,
            ConstellationLabel::Apsk32 => 32,
            ConstellationLabel::Apsk64 => 64,
        }
    }

    pub fn is_psk(self) -> bool {
        matches!(self, ConstellationLabel::Qpsk | ConstellationLabel::Psk8)
    }

    /// Points per ring, innermost first.
    fn ring_sizes(self) -> &'static [usize] {
        match self {
            ConstellationLabel::Qpsk => &[4],
            ConstellationLabel::Psk8 => &[8],
            ConstellationLabel::Apsk16 => &[4, 12],
            ConstellationLabel::Apsk32 => &[4, 12, 16],
            ConstellationLabel::Apsk64 => &[4, 12, 20, 28],
        }
    }

    /// Phase of the first point of each ring.
    fn ring_phases(self) -> Vec<f64> {
        match self {
            ConstellationLabel::Qpsk => vec![PI / 4.0],
            ConstellationLabel::Psk8 => vec![0.0],
            ConstellationLabel::Apsk16 => vec![PI / 4.0, PI / 12.0],
            ConstellationLabel::Apsk32 => vec![PI / 4.0, PI / 12.0, 0.0],
            ConstellationLabel::Apsk64 => self.ring_sizes().iter().map(|&n| PI / n as f64).collect(),
        }
    }

    /// Ring radius ratios used when the configuration does not provide any
    /// (16APSK and 32APSK at their rate-2/3 and rate-3/4 settings).
    pub fn default_ring_ratios(self) -> Vec<f64> {
        match self {
            ConstellationLabel::Qpsk | ConstellationLabel::Psk8 => vec![1.0],
            ConstellationLabel::Apsk16 => vec![1.0, 3.15],
            ConstellationLabel::Apsk32 => vec![1.0, 2.84, 5.27],
            ConstellationLabel::Apsk64 => vec![1.0, 2.4, 4.3, 7.0],
        }
    }
}

impl fmt::Display for ConstellationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConstellationLabel::Qpsk => "QPSK",
            ConstellationLabel::Psk8 => "8PSK",
            ConstellationLabel::Apsk16 => "16APSK",
            ConstellationLabel::Apsk32 => "32APSK",
            ConstellationLabel::Apsk64 => "64APSK",
        };
        f.write_str(s)
    }
}

impl FromStr for ConstellationLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ConstellationLabel::ALL
            .into_iter()
            .find(|l| l.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownConstellation(s.to_string()))
    }
}

/// Zero-mean, unit-energy constellation with a bit labeling.
///
/// Points are stored ring by ring (innermost first) and counter-clockwise
/// within a ring. The default labeling is the binary-reflected Gray code of
/// that index, which is Gray for PSK and Gray along each APSK ring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    pub label: ConstellationLabel,
    pub points: Vec<C64>,
    pub ring_ratios: Vec<f64>,
    ring_of: Vec<usize>,
    bit_labels: Vec<u32>,
}

pub fn build_constellation(
    label: ConstellationLabel,
    ring_ratio_config: Option<&[f64]>,
) -> Result<Constellation> {
    let sizes = label.ring_sizes();
    let ratios = match ring_ratio_config {
        Some(r) => r.to_vec(),
        None => label.default_ring_ratios(),
    };
    if ratios.len() != sizes.len() {
        return Err(Error::param(
            "ring_ratios",
            format!("{label} needs {} ring ratios, got {}", sizes.len(), ratios.len()),
        ));
    }
    if let Some(bad) = ratios.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(Error::param("ring_ratios", format!("non-positive ring ratio {bad}")));
    }
    let phases = label.ring_phases();
    let mut points = Vec::with_capacity(label.order());
    let mut ring_of = Vec::with_capacity(label.order());
    for (ring, (&n, (&r, &phase))) in sizes.iter().zip(ratios.iter().zip(&phases)).enumerate() {
        for k in 0..n {
            points.push(C64::from_polar(r, phase + 2.0 * PI * k as f64 / n as f64));
            ring_of.push(ring);
        }
    }
    let energy = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / points.len() as f64;
    let scale = energy.sqrt().recip();
    points.iter_mut().for_each(|p| *p *= scale);
    let bit_labels = (0..points.len() as u32).map(|i| i ^ (i >> 1)).collect();
    Ok(Constellation {
        label,
        points,
        ring_ratios: ratios,
        ring_of,
        bit_labels,
    })
}

impl Constellation {
    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.order().trailing_zeros() as usize
    }

    pub fn is_psk(&self) -> bool {
        self.label.is_psk()
    }

    pub fn num_rings(&self) -> usize {
        self.ring_ratios.len()
    }

    pub fn ring_of(&self, index: usize) -> usize {
        self.ring_of[index]
    }

    pub fn energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.order() as f64
    }

    pub fn mean(&self) -> C64 {
        self.points.iter().sum::<C64>() / self.order() as f64
    }

    /// Bit label of point `index` (most significant bit first in [`Self::bits`]).
    pub fn bit_label(&self, index: usize) -> u32 {
        self.bit_labels[index]
    }

    /// Bit `j` (0 = most significant) of the label of point `index`.
    pub fn bit(&self, index: usize, j: usize) -> u8 {
        let m = self.bits_per_symbol();
        ((self.bit_labels[index] >> (m - 1 - j)) & 1) as u8
    }

    /// Replace the labeling; must be a permutation of `0..M`.
    pub fn with_bit_labels(mut self, labels: Vec<u32>) -> Result<Self> {
        let mut seen = vec![false; self.order()];
        if labels.len() != self.order() {
            return Err(Error::param("bit_labels", "length must equal the constellation order"));
        }
        for &l in &labels {
            match seen.get_mut(l as usize) {
                Some(s) if !*s => *s = true,
                _ => return Err(Error::param("bit_labels", "labels must be a permutation")),
            }
        }
        self.bit_labels = labels;
        Ok(self)
    }

    /// Index of the point carrying bit label `label`.
    pub fn index_of_label(&self, label: u32) -> usize {
        self.bit_labels
            .iter()
            .position(|&l| l == label)
            .expect("labels form a permutation")
    }

    /// Permutation induced by rotating every point by `angle`, if the
    /// constellation is invariant under that rotation.
    pub fn rotation_permutation(&self, angle: f64) -> Option<Vec<usize>> {
        let rot = C64::from_polar(1.0, angle);
        self.points
            .iter()
            .map(|&p| {
                let q = p * rot;
                self.points.iter().position(|&r| (r - q).norm() < 1e-9)
            })
            .collect()
    }

    /// Draw `n` i.u.d. symbol indices.
    pub fn random_indices<R: rand::Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<usize> {
        (0..n).map(|_| rng.random_range(0..self.order())).collect()
    }

    pub fn map(&self, indices: &[usize]) -> Vec<C64> {
        indices.iter().map(|&i| self.points[i]).collect()
    }

    /// Largest point magnitude.
    pub fn peak(&self) -> f64 {
        self.points.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    /// Volterra self-term features `x |x|^{2i}` for `i < dim`.
    pub fn features(&self, index: usize, dim: usize) -> Vec<C64> {
        let x = self.points[index];
        let a2 = x.norm_sqr();
        (0..dim).map(|i| x * a2.powi(i as i32)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qpsk_is_gray_at_quarter_angles() {
        let c = build_constellation(ConstellationLabel::Qpsk, None).unwrap();
        for (k, p) in c.points.iter().enumerate() {
            let expect = C64::from_polar(1.0, PI / 4.0 + k as f64 * PI / 2.0);
            assert!((p - expect).norm() < 1e-15);
        }
        for k in 0..4 {
            let diff = c.bit_label(k) ^ c.bit_label((k + 1) % 4);
            assert_eq!(diff.count_ones(), 1);
        }
    }

    #[test]
    fn apsk16_energy_matches_ring_algebra() {
        // radii r1 = 1/s, r2 = 3.15/s with s^2 = (4 * 1 + 12 * 3.15^2) / 16
        let s2 = (4.0 + 12.0 * 3.15f64 * 3.15) / 16.0;
        let c = build_constellation(ConstellationLabel::Apsk16, Some(&[1.0, 3.15])).unwrap();
        assert!((c.points[0].norm() - 1.0 / s2.sqrt()).abs() < 1e-14);
        assert!((c.points[4].norm() - 3.15 / s2.sqrt()).abs() < 1e-14);
        assert!((c.energy() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_labels_are_normalized_and_zero_mean() {
        for label in ConstellationLabel::ALL {
            let c = build_constellation(label, None).unwrap();
            assert_eq!(c.order(), label.order());
            assert!((c.energy() - 1.0).abs() < 1e-12, "{label}");
            assert!(c.mean().norm() < 1e-12, "{label}");
        }
    }

    #[test]
    fn ring_ratio_errors() {
        assert!(build_constellation(ConstellationLabel::Apsk16, Some(&[1.0, -2.0])).is_err());
        assert!(build_constellation(ConstellationLabel::Apsk16, Some(&[1.0])).is_err());
        assert!("9QAM".parse::<ConstellationLabel>().is_err());
        assert_eq!("16apsk".parse::<ConstellationLabel>().unwrap(), ConstellationLabel::Apsk16);
    }

    #[test]
    fn apsk_rings_are_gray_along_the_ring() {
        let c = build_constellation(ConstellationLabel::Apsk32, None).unwrap();
        for i in 0..31 {
            if c.ring_of(i) == c.ring_of(i + 1) {
                assert_eq!((c.bit_label(i) ^ c.bit_label(i + 1)).count_ones(), 1);
            }
        }
    }

    #[test]
    fn quarter_turn_symmetry() {
        let c = build_constellation(ConstellationLabel::Apsk16, None).unwrap();
        let perm = c.rotation_permutation(PI / 2.0).unwrap();
        assert_eq!(perm[0], 1);
        assert!(c.rotation_permutation(0.1).is_none());
    }
}
