use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{History, IsoperimetricProblem};
use crate::error::{Error, Result};
use crate::expr::Binding;

/// JSON problem description with integrands written as expressions.
///
/// ```json
/// {"m": 1, "n": 1, "k": 1, "tau": 0.5, "t1": 0, "t2": 1,
///  "L": "qd^2", "g": ["q"], "l": [0.1666666666666667],
///  "history": "t*(1 - t)", "boundary": {"q": [0]}}
/// ```
///
/// `history` is one expression in `t`, or a list with one per component.
/// `boundary` keys are `q`, `qd`, `qdd`, … or `d{j}q`; omitted orders stay free.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub m: usize,
    pub n: usize,
    #[serde(default)]
    pub k: Option<usize>,
    pub tau: f64,
    pub t1: f64,
    pub t2: f64,
    #[serde(rename = "L")]
    pub lagrangian: String,
    #[serde(default)]
    pub g: Vec<String>,
    #[serde(default)]
    pub l: Vec<f64>,
    #[serde(default)]
    pub history: Option<HistorySpec>,
    #[serde(default)]
    pub boundary: BTreeMap<String, Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HistorySpec {
    One(String),
    PerComponent(Vec<String>),
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<IsoperimetricProblem> {
        let binding = Binding::variational(self.m, self.n);
        let mut problem = IsoperimetricProblem::new(
            self.m,
            self.n,
            self.tau,
            self.t1,
            self.t2,
            binding.integrand(&self.lagrangian)?,
        );
        if let Some(k) = self.k {
            if k != self.g.len() {
                return Err(Error::InvalidProblem(format!(
                    "k = {k} but {} constraint expressions",
                    self.g.len()
                )));
            }
        }
        if self.g.len() != self.l.len() {
            return Err(Error::InvalidProblem(format!(
                "{} constraint expressions but {} levels",
                self.g.len(),
                self.l.len()
            )));
        }
        for (g, &l) in self.g.iter().zip(&self.l) {
            problem = problem.with_constraint(binding.integrand(g)?, l);
        }
        if let Some(spec) = &self.history {
            let texts = match spec {
                HistorySpec::One(t) => vec![t.clone()],
                HistorySpec::PerComponent(v) => v.clone(),
            };
            let time = Binding::time_only();
            let comps = texts
                .iter()
                .map(|t| time.integrand(t))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            problem = problem.with_history(History::new(comps));
        }
        for (key, value) in &self.boundary {
            let order = boundary_order(key).ok_or_else(|| {
                Error::InvalidProblem(format!("unknown boundary key `{key}`"))
            })?;
            if order >= self.m {
                return Err(Error::InvalidProblem(format!(
                    "boundary key `{key}` fixes derivative {order}, only 0..{} are boundary data",
                    self.m
                )));
            }
            problem = problem.with_terminal(order, value.clone());
        }
        problem.validate()?;
        Ok(problem)
    }
}

fn boundary_order(key: &str) -> Option<usize> {
    if let Some(rest) = key.strip_prefix('q') {
        return rest.bytes().all(|b| b == b'd').then_some(rest.len());
    }
    key.strip_prefix('d')?.strip_suffix('q')?.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_the_classical_file() {
        let text = r#"{"m": 1, "n": 1, "k": 1, "tau": 0.5, "t1": 0, "t2": 1,
            "L": "qd^2", "g": ["q"], "l": [0.1666666666666667],
            "history": "t*(1 - t)", "boundary": {"q": [0]}}"#;
        let p = ProblemFile::from_json(text).unwrap().build().unwrap();
        assert_eq!(p.k(), 1);
        assert_eq!(p.terminal, vec![Some(vec![0.0])]);
        assert!((p.history.derivative(-0.5, 0).unwrap()[0] + 0.75).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_files() {
        let base = r#"{"m": 1, "n": 1, "tau": 0.5, "t1": 0, "t2": 1, "L": "qd^2""#;
        assert!(ProblemFile::from_json(&format!("{base}, \"g\": [\"q\"]}}")).unwrap().build().is_err());
        assert!(ProblemFile::from_json(&format!("{base}, \"boundary\": {{\"qd\": [1]}}}}"))
            .unwrap()
            .build()
            .is_err());
        assert!(ProblemFile::from_json("{").is_err());
        assert!(boundary_order("d2q") == Some(2) && boundary_order("qdd") == Some(2));
    }
}
