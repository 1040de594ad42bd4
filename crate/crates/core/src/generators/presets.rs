//! Parameter grids for the four synthetic studies.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{BlockModelParams, DegreeModel};
use crate::error::{Error, Result};
use crate::network::Partition;
use crate::rng;
use crate::spectral::MethodId;

const K: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimCase {
    Mlsbm,
    Mldcsbm,
    /// Study 4: heterogeneity bands tied to the community.
    MldcsbmA,
    /// Study 4: heterogeneity bands chosen per node.
    MldcsbmB,
}

impl SimCase {
    pub fn name(self) -> &'static str {
        match self {
            SimCase::Mlsbm => "mlsbm",
            SimCase::Mldcsbm => "mldcsbm",
            SimCase::MldcsbmA => "mldcsbm-a",
            SimCase::MldcsbmB => "mldcsbm-b",
        }
    }

    pub fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for SimCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SimCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlsbm" => Ok(SimCase::Mlsbm),
            "mldcsbm" => Ok(SimCase::Mldcsbm),
            "mldcsbm-a" | "a" => Ok(SimCase::MldcsbmA),
            "mldcsbm-b" | "b" => Ok(SimCase::MldcsbmB),
            other => Err(Error::InvalidParameter(format!("unknown case {other:?}"))),
        }
    }
}

/// Which quantity a study varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Nodes,
    Layers,
    Sparsity,
    Nu,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Nodes => "n",
            SweepParam::Layers => "T",
            SweepParam::Sparsity => "rho",
            SweepParam::Nu => "nu",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaScheme {
    /// MLSBM, no heterogeneity.
    None,
    /// `theta(i) = sqrt(rho) * (l(i) / K) * u`, `u ~ Unif(0, 1)` per node.
    Default,
    /// Bands `[0.9, 1]`, `[0.4, 0.6]`, `[0, 0.1]` for communities 1, 2, 3.
    CommunityBands,
    /// One of the three bands chosen uniformly per node.
    RandomBands,
}

/// One cell of a study grid. Connectivity matrices and theta are random,
/// so a grid point is a recipe; [`GridPoint::draw`] realizes it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n: usize,
    pub layers: usize,
    pub rho: f64,
    /// Regularizer scale for study 4: `tau = nu * sum(D) / n`.
    pub nu: Option<f64>,
    pub theta: ThetaScheme,
}

impl GridPoint {
    pub fn swept_value(&self, sweep: SweepParam) -> f64 {
        match sweep {
            SweepParam::Nodes => self.n as f64,
            SweepParam::Layers => self.layers as f64,
            SweepParam::Sparsity => self.rho,
            SweepParam::Nu => self.nu.unwrap_or(f64::NAN),
        }
    }

    /// Community sizes `n/2, n/5, 3n/10`.
    pub fn sizes(&self) -> [usize; 3] {
        let n1 = self.n / 2;
        let n2 = self.n / 5;
        [n1, n2, self.n - n1 - n2]
    }

    /// Draws connectivity matrices (entries `Unif(0,1)`, then `(B + B') / 2`)
    /// and theta, deterministically from `seed`.
    pub fn draw(&self, seed: u64) -> Result<BlockModelParams> {
        if self.n < 10 || !self.n.is_multiple_of(10) {
            return Err(Error::InvalidParameter(format!(
                "study grids need n to be a positive multiple of 10, got {}",
                self.n
            )));
        }
        let membership = Partition::from_sizes(&self.sizes());
        let mut b_rng = rng::stream(seed, 0);
        let connectivity = (0..self.layers)
            .map(|_| {
                let raw = DMatrix::from_fn(K, K, |_, _| rng::unit(&mut b_rng));
                (&raw + raw.transpose()) * 0.5
            })
            .collect();
        let mut t_rng = rng::stream(seed, 1);
        let labels = membership.labels().to_vec();
        let band = |c: usize, u: f64| match c {
            0 => 0.9 + u / 10.0,
            1 => 0.4 + u / 5.0,
            _ => u / 10.0,
        };
        let degree = match self.theta {
            ThetaScheme::None => DegreeModel::Sparsity(self.rho),
            ThetaScheme::Default => DegreeModel::Heterogeneous(
                labels
                    .iter()
                    .map(|&c| self.rho.sqrt() * ((c + 1) as f64 / K as f64) * rng::unit(&mut t_rng))
                    .collect(),
            ),
            ThetaScheme::CommunityBands => {
                DegreeModel::Heterogeneous(labels.iter().map(|&c| band(c, rng::unit(&mut t_rng))).collect())
            }
            ThetaScheme::RandomBands => DegreeModel::Heterogeneous(
                labels
                    .iter()
                    .map(|_| {
                        let which = ((rng::unit(&mut t_rng) * 3.0) as usize).min(2);
                        band(which, rng::unit(&mut t_rng))
                    })
                    .collect(),
            ),
        };
        BlockModelParams::new(membership, connectivity, degree)
    }
}

/// A study/case pair: its sweep, methods and the K-estimation variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyPreset {
    pub study: u32,
    pub case: SimCase,
    pub sweep: SweepParam,
    pub points: Vec<GridPoint>,
    /// Grid used when estimating K, where the study overrides rho or T.
    pub kest_points: Option<Vec<GridPoint>>,
    pub methods: Vec<MethodId>,
    /// Settings chosen here that the source protocol leaves open.
    pub notes: Vec<String>,
}

fn steps(lo: usize, hi: usize, step: usize) -> impl Iterator<Item = usize> {
    (lo..=hi).step_by(step)
}

/// Full-size grids for `study` (1-4) and `case`. `desk` applies the
/// reduced grids used for quick runs.
pub fn simulation_presets(study: u32, case: SimCase, desk: bool) -> Result<StudyPreset> {
    let dc = matches!(case, SimCase::Mldcsbm | SimCase::MldcsbmA | SimCase::MldcsbmB);
    let theta = if dc { ThetaScheme::Default } else { ThetaScheme::None };
    let point = |n, layers, rho| GridPoint {
        n,
        layers,
        rho,
        nu: None,
        theta,
    };
    let mut notes = Vec::new();
    if matches!(case, SimCase::MldcsbmA | SimCase::MldcsbmB) && study != 4 {
        return Err(Error::InvalidParameter(format!("case {case} only exists in study 4")));
    }
    let (sweep, points, kest_points): (SweepParam, Vec<GridPoint>, Option<Vec<GridPoint>>) = match (study, dc) {
        (1, false) => {
            let ns: Vec<usize> = steps(200, 1000, 200).collect();
            (
                SweepParam::Nodes,
                ns.iter().map(|&n| point(n, 10, 0.04)).collect(),
                Some(ns.iter().map(|&n| point(n, 10, 0.25)).collect()),
            )
        }
        (1, true) => {
            let cap = if desk { 2000 } else { 5000 };
            let ns: Vec<usize> = steps(1000, cap, 1000).collect();
            (
                SweepParam::Nodes,
                ns.iter().map(|&n| point(n, 5, 0.16)).collect(),
                Some(ns.iter().map(|&n| point(n, 20, 1.0)).collect()),
            )
        }
        (2, _) => {
            let cap = if desk { 50 } else { 100 };
            let ts: Vec<usize> = steps(10, cap, 10).collect();
            let (n, rho, kest_rho) = if dc { (500, 0.16, 0.6) } else { (200, 0.04, 0.16) };
            (
                SweepParam::Layers,
                ts.iter().map(|&t| point(n, t, rho)).collect(),
                Some(ts.iter().map(|&t| point(n, t, kest_rho)).collect()),
            )
        }
        (3, _) => {
            let (n, t) = if dc { (500, 50) } else { (200, 10) };
            let rhos: Vec<f64> = (1..=16).map(|i| (0.05 * i as f64).powi(2)).collect();
            notes.push("K-estimation reuses the rho sweep (no override given)".into());
            let pts: Vec<GridPoint> = rhos.iter().map(|&r| point(n, t, r)).collect();
            (SweepParam::Sparsity, pts.clone(), Some(pts))
        }
        (4, _) => {
            let (rho, scheme) = match case {
                SimCase::Mlsbm => (0.02, ThetaScheme::None),
                SimCase::Mldcsbm => {
                    return Err(Error::InvalidParameter(
                        "study 4 uses cases mlsbm, mldcsbm-a and mldcsbm-b".into(),
                    ))
                }
                SimCase::MldcsbmA => (1.0, ThetaScheme::CommunityBands),
                SimCase::MldcsbmB => (1.0, ThetaScheme::RandomBands),
            };
            let nus: Vec<f64> = if desk {
                notes.push("desk scale coarsens nu to {0.1, 0.2, ..., 2}".into());
                (1..=20).map(|i| i as f64 / 10.0).collect()
            } else {
                (1..=200).map(|i| i as f64 / 100.0).collect()
            };
            let pts = nus
                .iter()
                .map(|&nu| GridPoint {
                    n: 1000,
                    layers: 20,
                    rho,
                    nu: Some(nu),
                    theta: scheme,
                })
                .collect();
            (SweepParam::Nu, pts, None)
        }
        (other, _) => return Err(Error::UnknownStudy(other)),
    };
    if dc && study == 1 {
        notes.push("K-estimation uses rho = 1 and T = 20 over the same n sweep".into());
    }
    notes.push("connectivity matrices and theta are redrawn for every replicate".into());
    let methods = if study == 4 {
        vec![MethodId::Rdsos, MethodId::DcRdsos]
    } else {
        MethodId::ALL.to_vec()
    };
    Ok(StudyPreset {
        study,
        case,
        sweep,
        points,
        kest_points,
        methods,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn study_one_mlsbm() {
        let p = simulation_presets(1, SimCase::Mlsbm, false).unwrap();
        let ns: Vec<usize> = p.points.iter().map(|g| g.n).collect();
        assert_eq!(ns, vec![200, 400, 600, 800, 1000]);
        assert!(p.points.iter().all(|g| g.rho == 0.04 && g.layers == 10));
        assert!(p.kest_points.unwrap().iter().all(|g| g.rho == 0.25));
        assert_eq!(p.methods.len(), 8);
        assert_eq!(p.points[0].sizes(), [100, 40, 60]);
    }

    #[test]
    fn study_three_sparsity_grid() {
        let p = simulation_presets(3, SimCase::Mlsbm, true).unwrap();
        let rhos: Vec<f64> = p.points.iter().map(|g| g.rho).collect();
        assert_eq!(rhos.len(), 16);
        assert!((rhos[0] - 0.0025).abs() < 1e-15);
        assert!((rhos[15] - 0.64).abs() < 1e-12);
    }

    #[test]
    fn study_four_nu_grid() {
        let p = simulation_presets(4, SimCase::MldcsbmA, false).unwrap();
        assert_eq!(p.points.len(), 200);
        assert_eq!(p.points[0].nu, Some(0.01));
        assert_eq!(p.points[199].nu, Some(2.0));
        assert_eq!(p.methods, vec![MethodId::Rdsos, MethodId::DcRdsos]);
        assert!(p.kest_points.is_none());
        assert!(simulation_presets(4, SimCase::Mldcsbm, false).is_err());
        assert!(matches!(simulation_presets(5, SimCase::Mlsbm, false), Err(Error::UnknownStudy(5))));
    }

    #[test]
    fn desk_caps() {
        let p = simulation_presets(1, SimCase::Mldcsbm, true).unwrap();
        assert!(p.points.iter().all(|g| g.n <= 2000));
        let p = simulation_presets(2, SimCase::Mlsbm, true).unwrap();
        assert_eq!(p.points.last().unwrap().layers, 50);
        assert_eq!(simulation_presets(2, SimCase::Mlsbm, false).unwrap().points.len(), 10);
    }

    #[test]
    fn drawn_params_follow_protocol() {
        let g = GridPoint {
            n: 200,
            layers: 4,
            rho: 0.25,
            nu: None,
            theta: ThetaScheme::Default,
        };
        let p = g.draw(11).unwrap();
        assert_eq!(p, g.draw(11).unwrap());
        assert_eq!(p.membership.sizes(), vec![100, 40, 60]);
        for l in 0..4 {
            let b = p.connectivity_matrix(l);
            assert_eq!(b, b.transpose());
            assert!(b.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        let DegreeModel::Heterogeneous(theta) = &p.degree else {
            panic!("expected theta")
        };
        for (i, &t) in theta.iter().enumerate() {
            let c = p.membership.labels()[i] + 1;
            assert!(t >= 0.0 && t <= 0.5 * c as f64 / 3.0);
        }

        let a = GridPoint {
            theta: ThetaScheme::CommunityBands,
            rho: 1.0,
            ..g.clone()
        }
        .draw(2)
        .unwrap();
        let DegreeModel::Heterogeneous(theta) = &a.degree else {
            panic!("expected theta")
        };
        for (i, &t) in theta.iter().enumerate() {
            match a.membership.labels()[i] {
                0 => assert!((0.9..=1.0).contains(&t)),
                1 => assert!((0.4..=0.6).contains(&t)),
                _ => assert!((0.0..=0.1).contains(&t)),
            }
        }
        assert!(GridPoint { n: 25, ..g }.draw(0).is_err());
    }
}
