//! Finite weighted sets of fading states standing in for the channel distribution.

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::ChannelVector;
use crate::rng::rng_from_seed;

/// Weighted fading states; weights are positive and sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct FadingEnsemble {
    states: Vec<ChannelVector>,
    weights: Vec<f64>,
}

impl FadingEnsemble {
    /// Builds an ensemble, normalizing the weights to sum to one.
    pub fn fixed(states: Vec<ChannelVector>, weights: Vec<f64>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::invalid("ensemble needs at least one state"));
        }
        if states.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: states.len(), got: weights.len() });
        }
        let k = states[0].k();
        if let Some(s) = states.iter().find(|s| s.k() != k) {
            return Err(Error::DimensionMismatch { expected: k, got: s.k() });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::invalid(format!("ensemble weights must be positive, got {w}")));
        }
        let total: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { states, weights })
    }

    /// Equiprobable states.
    pub fn uniform(states: Vec<ChannelVector>) -> Result<Self> {
        let n = states.len();
        Self::fixed(states, vec![1.0; n])
    }

    /// Convenience constructor from per-state power gains `|h_k|^2`.
    pub fn from_power_gains(rows: &[Vec<f64>], weights: Vec<f64>) -> Result<Self> {
        let states = rows.iter().map(|r| ChannelVector::from_power_gains(r)).collect::<Result<_>>()?;
        Self::fixed(states, weights)
    }

    /// `n` i.i.d. Rayleigh states: `h_k ~ CN(0, sigma_h_sq)` independently per device.
    pub fn rayleigh(k: usize, n: usize, sigma_h_sq: f64, seed: u64) -> Result<Self> {
        if k == 0 || n == 0 {
            return Err(Error::invalid("rayleigh ensemble needs k >= 1 and n >= 1"));
        }
        if !(sigma_h_sq.is_finite() && sigma_h_sq > 0.0) {
            return Err(Error::invalid(format!("sigma_h_sq must be positive, got {sigma_h_sq}")));
        }
        let mut rng = rng_from_seed(seed);
        let scale = (sigma_h_sq / 2.0).sqrt();
        let states = (0..n)
            .map(|_| {
                let gains = (0..k)
                    .map(|_| {
                        let x: f64 = rng.sample(StandardNormal);
                        let y: f64 = rng.sample(StandardNormal);
                        Complex64::new(x * scale, y * scale)
                    })
                    .collect();
                ChannelVector::new(gains)
            })
            .collect::<Result<Vec<_>>>()?;
        let w = 1.0 / n as f64;
        Ok(Self { states, weights: vec![w; n] })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn k(&self) -> usize {
        self.states[0].k()
    }

    pub fn states(&self) -> &[ChannelVector] {
        &self.states
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn state(&self, i: usize) -> &ChannelVector {
        &self.states[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ChannelVector, f64)> + '_ {
        self.states.iter().zip(self.weights.iter().copied())
    }

    /// `E[|h_k|^2]` per device.
    pub fn mean_power_gains(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.k()];
        for (ch, w) in self.iter() {
            for (o, a) in out.iter_mut().zip(ch.power_gains()) {
                *o += w * a;
            }
        }
        out
    }

    /// Writes `state_index,weight,re_h_1,im_h_1,...,re_h_K,im_h_K`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["state_index".to_string(), "weight".to_string()];
        for k in 1..=self.k() {
            header.push(format!("re_h_{k}"));
            header.push(format!("im_h_{k}"));
        }
        wtr.write_record(&header)?;
        for (i, (ch, weight)) in self.iter().enumerate() {
            let mut rec = vec![i.to_string(), weight.to_string()];
            for h in ch.gains() {
                rec.push(h.re.to_string());
                rec.push(h.im.to_string());
            }
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads the format written by [`FadingEnsemble::write_csv`].
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        let cols = headers.len();
        if cols < 4 || cols % 2 != 0 || &headers[0] != "state_index" || &headers[1] != "weight" {
            return Err(Error::invalid("ensemble CSV must have columns state_index,weight,re_h_1,im_h_1,..."));
        }
        let k = (cols - 2) / 2;
        let mut states = Vec::new();
        let mut weights = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec[i].trim().parse::<f64>().map_err(|e| Error::invalid(format!("bad number {:?}: {e}", &rec[i])))
            };
            weights.push(parse(1)?);
            let gains = (0..k).map(|j| Ok(Complex64::new(parse(2 + 2 * j)?, parse(3 + 2 * j)?))).collect::<Result<_>>()?;
            states.push(ChannelVector::new(gains)?);
        }
        Self::fixed(states, weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_normalizes_weights() {
        let s = ChannelVector::from_power_gains(&[1.0]).unwrap();
        let e = FadingEnsemble::fixed(vec![s.clone()], vec![7.0]).unwrap();
        assert_eq!(e.weights(), &[1.0]);
        let e = FadingEnsemble::fixed(vec![s.clone(), s], vec![1.0, 1.0]).unwrap();
        assert_eq!(e.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn fixed_rejects_bad_input() {
        let a = ChannelVector::from_power_gains(&[1.0]).unwrap();
        let b = ChannelVector::from_power_gains(&[1.0, 2.0]).unwrap();
        assert!(FadingEnsemble::fixed(vec![], vec![]).is_err());
        assert!(FadingEnsemble::fixed(vec![a.clone(), b], vec![1.0, 1.0]).is_err());
        assert!(FadingEnsemble::fixed(vec![a.clone()], vec![0.0]).is_err());
        assert!(FadingEnsemble::fixed(vec![a], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn rayleigh_is_deterministic() {
        let a = FadingEnsemble::rayleigh(3, 50, 1.0, 11).unwrap();
        let b = FadingEnsemble::rayleigh(3, 50, 1.0, 11).unwrap();
        let c = FadingEnsemble::rayleigh(3, 50, 1.0, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rayleigh_moments() {
        let n = 100_000;
        let e = FadingEnsemble::rayleigh(1, n, 1.0, 1).unwrap();
        let mean = e.mean_power_gains()[0];
        assert!((0.99..=1.01).contains(&mean), "mean {mean}");
        // |h|^2 ~ Exp(1): P(|h|^2 > 1) = 1/e
        let tail = e.states().iter().filter(|s| s.power_gains()[0] > 1.0).count() as f64 / n as f64;
        assert!((tail - (-1.0f64).exp()).abs() <= 0.01, "tail {tail}");
    }

    #[test]
    fn rayleigh_devices_uncorrelated() {
        let n = 100_000;
        let e = FadingEnsemble::rayleigh(2, n, 1.0, 5).unwrap();
        let xs: Vec<[f64; 2]> = e.states().iter().map(|s| [s.power_gains()[0], s.power_gains()[1]]).collect();
        let m0 = xs.iter().map(|x| x[0]).sum::<f64>() / n as f64;
        let m1 = xs.iter().map(|x| x[1]).sum::<f64>() / n as f64;
        let (mut c, mut v0, mut v1) = (0.0, 0.0, 0.0);
        for x in &xs {
            c += (x[0] - m0) * (x[1] - m1);
            v0 += (x[0] - m0).powi(2);
            v1 += (x[1] - m1).powi(2);
        }
        let corr = c / (v0 * v1).sqrt();
        assert!(corr.abs() <= 0.01, "corr {corr}");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let e = FadingEnsemble::rayleigh(3, 20, 0.7, 3).unwrap();
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        let back = FadingEnsemble::read_csv(buf.as_slice()).unwrap();
        assert_eq!(e.states(), back.states());
        for (a, b) in e.weights().iter().zip(back.weights()) {
            assert!((a - b).abs() <= 1e-15);
        }
        assert!(FadingEnsemble::read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
