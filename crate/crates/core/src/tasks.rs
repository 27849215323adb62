//! Benchmark tasks: Schwefel 1.2 and a redundant planar arm.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const SCHWEFEL_DEFAULT_DIM: usize = 100;
pub const ARM_DEFAULT_DOF: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Schwefel,
    Arm,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Schwefel => "schwefel",
            TaskKind::Arm => "arm",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "schwefel" => Ok(TaskKind::Schwefel),
            "arm" => Ok(TaskKind::Arm),
            other => Err(Error::Config(format!(
                "unknown task '{other}' (valid: schwefel, arm)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    pub descriptor: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    /// Genotype dimension.
    pub n: usize,
    pub behavior_bounds: Vec<(f64, f64)>,
    /// Per-dimension target range of the genotype-to-phenotype scaling.
    pub phenotype_bounds: Vec<(f64, f64)>,
}

impl TaskSpec {
    pub fn schwefel(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!(
                "schwefel needs at least 2 dimensions, got {n}"
            )));
        }
        Ok(TaskSpec {
            kind: TaskKind::Schwefel,
            n,
            behavior_bounds: vec![(-5.0, 5.0); 2],
            phenotype_bounds: vec![(-5.0, 5.0); n],
        })
    }

    pub fn arm(dof: usize) -> Result<Self> {
        if dof == 0 {
            return Err(Error::Config("arm needs at least one joint".into()));
        }
        Ok(TaskSpec {
            kind: TaskKind::Arm,
            n: dof,
            behavior_bounds: vec![(-1.0, 1.0); 2],
            phenotype_bounds: vec![(-PI, PI); dof],
        })
    }

    /// Task with its default dimension.
    pub fn default_for(kind: TaskKind) -> Self {
        match kind {
            TaskKind::Schwefel => Self::schwefel(SCHWEFEL_DEFAULT_DIM).unwrap(),
            TaskKind::Arm => Self::arm(ARM_DEFAULT_DOF).unwrap(),
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn behavior_dim(&self) -> usize {
        self.behavior_bounds.len()
    }

    pub fn scale(&self, x: &[f64]) -> Vec<f64> {
        scale(x, &self.phenotype_bounds)
    }

    pub fn unscale(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(&self.phenotype_bounds)
            .map(|(v, (lo, hi))| (v - lo) / (hi - lo))
            .collect()
    }

    /// Fitness and behavior descriptor of a genotype.
    pub fn evaluate(&self, x: &[f64]) -> Evaluation {
        debug_assert_eq!(x.len(), self.n);
        let y = self.scale(x);
        match self.kind {
            TaskKind::Schwefel => evaluate_schwefel(&y),
            TaskKind::Arm => Evaluation {
                fitness: arm_fitness(&y),
                descriptor: arm_forward_kinematics(&y),
            },
        }
    }
}

/// Affine map from the unit box onto `bounds`.
pub fn scale(x: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    x.iter()
        .zip(bounds)
        .map(|(v, (lo, hi))| lo + v * (hi - lo))
        .collect()
}

/// Negated Schwefel 1.2 via running prefix sums; descriptor is `(y1, y2)`.
pub fn evaluate_schwefel(y: &[f64]) -> Evaluation {
    let mut prefix = 0.0;
    let mut total = 0.0;
    for v in y {
        prefix += v;
        total += prefix * prefix;
    }
    Evaluation {
        fitness: -total,
        descriptor: [y[0], y[1]],
    }
}

/// End-effector position of a planar arm with equal links summing to 1.
pub fn arm_forward_kinematics(angles: &[f64]) -> [f64; 2] {
    let link = 1.0 / angles.len() as f64;
    let mut theta = 0.0;
    let (mut x, mut y) = (0.0, 0.0);
    for a in angles {
        theta += a;
        x += link * theta.cos();
        y += link * theta.sin();
    }
    [x, y]
}

/// Negative population variance of the joint angles.
pub fn arm_fitness(angles: &[f64]) -> f64 {
    let n = angles.len() as f64;
    let mean = angles.iter().sum::<f64>() / n;
    -angles.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_schwefel(y: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..y.len() {
            let inner: f64 = y[..=i].iter().sum();
            total += inner * inner;
        }
        -total
    }

    #[test]
    fn scaling_examples() {
        let arm = TaskSpec::arm(12).unwrap();
        assert!(arm.scale(&[0.5; 12]).iter().all(|v| v.abs() < 1e-15));
        let sch = TaskSpec::schwefel(100).unwrap();
        assert!(sch.scale(&[0.0; 100]).iter().all(|&v| v == -5.0));
    }

    #[test]
    fn schwefel_examples() {
        let zero = evaluate_schwefel(&[0.0; 100]);
        assert_eq!(zero.fitness, 0.0);
        assert_eq!(zero.descriptor, [0.0, 0.0]);

        let mut y = [0.0; 100];
        y[0] = 1.0;
        let e = evaluate_schwefel(&y);
        assert_eq!(e.fitness, -100.0);
        assert_eq!(e.descriptor, [1.0, 0.0]);

        y[1] = 1.0;
        assert_eq!(evaluate_schwefel(&y).fitness, -397.0);
    }

    #[test]
    fn arm_examples() {
        let b = arm_forward_kinematics(&[0.0; 12]);
        assert!((b[0] - 1.0).abs() < 1e-12 && b[1].abs() < 1e-12);

        let b = arm_forward_kinematics(&[-PI; 12]);
        assert!(b[0].abs() < 1e-12 && b[1].abs() < 1e-12, "{b:?}");

        let b = arm_forward_kinematics(&[PI / 2.0, 0.0]);
        assert!(b[0].abs() < 1e-12 && (b[1] - 1.0).abs() < 1e-12);

        assert!(arm_fitness(&[0.3; 12]).abs() < 1e-15);
        let f = arm_fitness(&[PI / 2.0, -PI / 2.0]);
        assert!((f + (PI / 2.0).powi(2)).abs() < 1e-12);
        assert!((f + 2.4674).abs() < 1e-4);
    }

    #[test]
    fn evaluate_goes_through_scaling() {
        let arm = TaskSpec::arm(2).unwrap();
        let e = arm.evaluate(&[0.75, 0.5]);
        assert!(e.descriptor[0].abs() < 1e-12 && (e.descriptor[1] - 1.0).abs() < 1e-12);
        let sch = TaskSpec::schwefel(3).unwrap();
        let e = sch.evaluate(&[0.6, 0.5, 0.5]);
        assert!((e.fitness + 3.0).abs() < 1e-12);
    }

    #[test]
    fn task_names_parse() {
        assert_eq!("ARM".parse::<TaskKind>().unwrap(), TaskKind::Arm);
        assert!("hexapod".parse::<TaskKind>().is_err());
        assert!(TaskSpec::schwefel(1).is_err());
        assert!(TaskSpec::arm(0).is_err());
    }

    proptest! {
        #[test]
        fn scale_round_trip(x in prop::collection::vec(0.0f64..=1.0, 12)) {
            let arm = TaskSpec::arm(12).unwrap();
            let back = arm.unscale(&arm.scale(&x));
            for (a, b) in x.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn schwefel_matches_double_sum(y in prop::collection::vec(-5.0f64..5.0, 100)) {
            let fast = evaluate_schwefel(&y).fitness;
            let slow = naive_schwefel(&y);
            prop_assert!(fast <= 0.0);
            prop_assert!((fast - slow).abs() <= 1e-9 * slow.abs().max(1.0));
        }

        #[test]
        fn arm_bounds_and_fitness(y in prop::collection::vec(-PI..PI, 1..20), shift in -1.0f64..1.0) {
            let b = arm_forward_kinematics(&y);
            prop_assert!((b[0] * b[0] + b[1] * b[1]).sqrt() <= 1.0 + 1e-12);
            let f = arm_fitness(&y);
            prop_assert!(f <= 0.0);
            let shifted: Vec<f64> = y.iter().map(|a| a + shift).collect();
            prop_assert!((arm_fitness(&shifted) - f).abs() < 1e-9);
        }
    }
}
