//! Points on the unit n-sphere.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

const NORM_TOL: f64 = 1e-12;

/// A unit vector in (n+1)-space, i.e. a point on the n-sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Direction {
    coords: Vec<f64>,
}

impl Direction {
    /// Accepts coordinates that are already unit length.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::Domain { what: "direction length", value: coords.len() as f64, domain: ">= 2" });
        }
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Domain { what: "direction norm", value: norm, domain: "1 +- 1e-12" });
        }
        Ok(Self { coords })
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalized(mut coords: Vec<f64>) -> Result<Self> {
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Domain { what: "vector norm", value: norm, domain: "(0, inf)" });
        }
        coords.iter_mut().for_each(|c| *c /= norm);
        Self::new(coords)
    }

    /// Point on the circle at polar angle `theta`.
    pub fn from_angle(theta: f64) -> Self {
        Self { coords: vec![theta.cos(), theta.sin()] }
    }

    /// Point on the circle at `deg` degrees.
    pub fn from_degrees(deg: f64) -> Self {
        Self::from_angle(deg.to_radians())
    }

    /// Sphere dimension n (the vector lives in n+1 dimensions).
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dot(&self, other: &Direction) -> Result<f64> {
        if self.coords.len() != other.coords.len() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(self.coords.iter().zip(&other.coords).map(|(a, b)| a * b).sum())
    }

    pub fn antipode(&self) -> Direction {
        Direction { coords: self.coords.iter().map(|c| -c).collect() }
    }

    /// Applies an orthogonal matrix given as rows.
    pub fn rotated(&self, rows: &[Vec<f64>]) -> Direction {
        let coords: Vec<f64> = rows.iter().map(|row| row.iter().zip(&self.coords).map(|(r, c)| r * c).sum()).collect();
        // Renormalize to absorb rounding in the matrix product.
        Direction::normalized(coords).expect("rotation of a unit vector is nonzero")
    }
}

impl TryFrom<Vec<f64>> for Direction {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        // Files written by hand rarely carry 12 correct digits.
        Direction::normalized(v)
    }
}

impl From<Direction> for Vec<f64> {
    fn from(d: Direction) -> Vec<f64> {
        d.coords
    }
}

/// Uniform point on the n-sphere: a normalized vector of n+1 independent
/// standard normals, redrawn on the (measure-zero) zero vector.
pub fn sample_direction<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Direction {
    assert!(n >= 1, "sphere dimension must be >= 1");
    loop {
        let v: Vec<f64> = (0..=n).map(|_| rng.sample(StandardNormal)).collect();
        if let Ok(d) = Direction::normalized(v) {
            return d;
        }
    }
}

/// [`sample_direction`] keyed by a stream position.
pub fn uniform_direction(n: usize, stream: &RngStream) -> Result<Direction> {
    if n == 0 {
        return Err(Error::Domain { what: "sphere dimension", value: 0.0, domain: ">= 1" });
    }
    Ok(sample_direction(n, &mut stream.rng()))
}

/// Angle in [0, π] between the radial lines through `u` and `v`.
pub fn angle_between(u: &Direction, v: &Direction) -> Result<f64> {
    Ok(u.dot(v)?.clamp(-1.0, 1.0).acos())
}

/// Haar-random orthogonal matrix of size `dim`, by Gram–Schmidt on
/// Gaussian rows.
pub fn random_rotation<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while rows.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for r in &rows {
            let p: f64 = r.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(r).for_each(|(x, a)| *x -= p * a);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            rows.push(v);
        }
    }
    rows
}

/// Reduce an angle into [0, 2π).
pub(crate) fn wrap_two_pi(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t >= 2.0 * PI {
        0.0
    } else {
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::tags;
    use approx::assert_abs_diff_eq;

    #[test]
    fn angle_examples() {
        let x = Direction::new(vec![1.0, 0.0, 0.0]).unwrap();
        let y = Direction::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(angle_between(&x, &x).unwrap(), 0.0);
        assert_abs_diff_eq!(angle_between(&x, &x.antipode()).unwrap(), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(angle_between(&x, &y).unwrap(), PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = Direction::from_angle(0.3);
        let b = Direction::new(vec![0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(angle_between(&a, &b), Err(Error::DimensionMismatch(1, 2))));
    }

    #[test]
    fn rejects_non_unit() {
        assert!(Direction::new(vec![1.0, 1.0]).is_err());
        assert!(Direction::normalized(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn circle_draw_is_unit_and_reproducible() {
        let s = RngStream::new(5, tags::KEYS).at(3);
        let d = uniform_direction(1, &s).unwrap();
        assert_eq!(d.coords().len(), 2);
        assert_abs_diff_eq!(d.dot(&d).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(d, uniform_direction(1, &s).unwrap());
    }

    #[test]
    fn sphere_coordinate_means_vanish() {
        // Each coordinate of a uniform point on S^2 has variance 1/3.
        let n = 100_000u64;
        let base = RngStream::new(11, tags::KEYS);
        let mut sums = [0.0f64; 3];
        for i in 0..n {
            let d = uniform_direction(2, &base.at(i)).unwrap();
            for (s, c) in sums.iter_mut().zip(d.coords()) {
                *s += c;
            }
        }
        let sigma = 1.0 / (3.0 * n as f64).sqrt();
        for s in sums {
            assert!((s / n as f64).abs() < 4.0 * sigma, "mean {}", s / n as f64);
        }
    }

    #[test]
    fn circle_angles_look_uniform() {
        let base = RngStream::new(12, tags::KEYS);
        let mut bins = [0u32; 8];
        let n = 80_000;
        for i in 0..n {
            let d = uniform_direction(1, &base.at(i)).unwrap();
            let t = wrap_two_pi(d.coords()[1].atan2(d.coords()[0]));
            bins[((t / (2.0 * PI)) * 8.0) as usize % 8] += 1;
        }
        let expect = n as f64 / 8.0;
        for b in bins {
            assert!((b as f64 - expect).abs() < 5.0 * expect.sqrt());
        }
    }

    #[test]
    fn rotation_preserves_angles() {
        let mut rng = RngStream::new(1, 2).rng();
        let m = random_rotation(4, &mut rng);
        let u = sample_direction(3, &mut rng);
        let v = sample_direction(3, &mut rng);
        let before = angle_between(&u, &v).unwrap();
        let after = angle_between(&u.rotated(&m), &v.rotated(&m)).unwrap();
        assert_abs_diff_eq!(before, after, epsilon = 1e-12);
    }

    #[test]
    fn serde_roundtrip_normalizes() {
        let d: Direction = serde_json::from_str("[3.0, 4.0]").unwrap();
        assert_abs_diff_eq!(d.coords()[0], 0.6, epsilon = 1e-15);
        let s = serde_json::to_string(&d).unwrap();
        let back: Direction = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
    }
}
