use super::poly::{monomials, tangential, PolyForm1};
use crate::algebra::ImQuat;
use crate::error::{Result, YmbError};
use crate::fields::{Field1, Form1, S3Rule, P4};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{BufRead, Write};

/// 1-form data on the nodes of an S³ rule.
///
/// `lift`, when present, is a polynomial on ℝ⁴ whose tangential restriction
/// is the data.
#[derive(Clone, Debug)]
pub struct BoundaryForm {
    pub rule: S3Rule,
    pub values: Vec<Form1>,
    pub lift: Option<PolyForm1>,
}

impl BoundaryForm {
    /// Full (not necessarily tangential) data from a closed-form evaluator.
    pub fn from_fn(rule: &S3Rule, f: impl Fn(&P4) -> Form1) -> Self {
        BoundaryForm {
            values: rule.dirs.iter().map(f).collect(),
            rule: rule.clone(),
            lift: None,
        }
    }

    /// Tangential restriction of a polynomial form.
    pub fn from_poly(rule: &S3Rule, poly: PolyForm1) -> Self {
        BoundaryForm {
            values: rule.dirs.iter().map(|z| tangential(&poly.value(z), z)).collect(),
            rule: rule.clone(),
            lift: Some(poly),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest normal component `|Σ_j ζ_j A_j|` over the nodes.
    pub fn normal_defect(&self) -> f64 {
        self.rule
            .dirs
            .iter()
            .zip(&self.values)
            .map(|(z, a)| {
                let mut n = ImQuat::zero();
                for j in 0..4 {
                    n = n + a[j].scalef(z[j]);
                }
                n.dot(n).sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn tangential_part(&self) -> BoundaryForm {
        BoundaryForm {
            values: self
                .rule
                .dirs
                .iter()
                .zip(&self.values)
                .map(|(z, a)| tangential(a, z))
                .collect(),
            rule: self.rule.clone(),
            lift: self.lift.clone(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|a| a.iter().map(|q| q.dot(*q)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.rule.hash().as_bytes());
        for a in &self.values {
            for q in a {
                for c in q.arr() {
                    h.update(c.to_le_bytes());
                }
            }
        }
        format!("{:x}", h.finalize())[..16].to_string()
    }

    /// A polynomial of degree `≤ degree` whose tangential trace reproduces the
    /// data: the stored lift when present, else a least-squares fit.
    pub fn polynomial_lift(&self, degree: usize) -> Result<(PolyForm1, f64)> {
        if let Some(p) = &self.lift {
            return Ok((p.clone(), 0.0));
        }
        let monos = monomials(degree);
        let rows = self.len();
        let mut a = DMatrix::<f64>::zeros(rows, monos.len());
        for (r, z) in self.rule.dirs.iter().enumerate() {
            let mv = super::poly::eval_monomials(&monos, degree, z);
            let sw = self.rule.weights[r].sqrt();
            for (c, m) in mv.iter().enumerate() {
                a[(r, c)] = sw * m;
            }
        }
        let svd = a.clone().svd(true, true);
        let cut = 1e-10 * svd.singular_values.max();
        let mut poly = PolyForm1::zeros(degree);
        for j in 0..4 {
            for k in 0..3 {
                let b = DVector::from_iterator(
                    rows,
                    (0..rows).map(|r| self.rule.weights[r].sqrt() * self.values[r][j].arr()[k]),
                );
                let solve = |b: &DVector<f64>| svd.solve(b, cut).map_err(|e| YmbError::DegenerateFit(e.to_string()));
                let x = solve(&b)?;
                // One step of iterative refinement.
                let x = &x + solve(&(&b - &a * &x))?;
                for (m, v) in x.iter().enumerate() {
                    poly.coef[m][j][k] = *v;
                }
            }
        }
        let fit = BoundaryForm::from_poly(&self.rule, poly.clone());
        let resid = fit
            .values
            .iter()
            .zip(&self.values)
            .map(|(u, v)| (0..4).map(|j| (u[j] - v[j]).dot(u[j] - v[j])).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        Ok((poly, resid))
    }

    /// CSV with a first line `# node_set_hash=<hash>,l=<l>` followed by a header
    /// and one row per node: `z0..z3` then `a{j}_{c}` for `j = 0..3`, `c ∈ {i,j,k}`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# node_set_hash={},l={}", self.rule.hash(), self.rule.l)?;
        let mut wr = csv::Writer::from_writer(w);
        let mut head: Vec<String> = (0..4).map(|i| format!("z{i}")).collect();
        for j in 0..4 {
            for c in ["i", "j", "k"] {
                head.push(format!("a{j}_{c}"));
            }
        }
        wr.write_record(&head).map_err(csv_err)?;
        for (z, a) in self.rule.dirs.iter().zip(&self.values) {
            let mut row: Vec<String> = z.iter().map(|v| format!("{v:e}")).collect();
            for q in a {
                row.extend(q.arr().iter().map(|v| format!("{v:e}")));
            }
            wr.write_record(&row).map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(mut r: R) -> Result<Self> {
        let mut first = String::new();
        r.read_line(&mut first)?;
        let first = first.trim();
        let body = first
            .strip_prefix("# ")
            .ok_or_else(|| YmbError::InvalidParams("boundary CSV lacks the node-set header".into()))?;
        let mut hash = None;
        let mut l = None;
        for kv in body.split(',') {
            match kv.split_once('=') {
                Some(("node_set_hash", v)) => hash = Some(v.to_string()),
                Some(("l", v)) => l = v.parse::<usize>().ok(),
                _ => {}
            }
        }
        let (hash, l) = match (hash, l) {
            (Some(h), Some(l)) => (h, l),
            _ => return Err(YmbError::InvalidParams(format!("bad boundary CSV header: {first}"))),
        };
        let rule = S3Rule::new(l);
        if rule.hash() != hash {
            return Err(YmbError::InvalidParams(format!(
                "node-set hash {hash} does not match the rule for l = {l}"
            )));
        }
        let mut rd = csv::Reader::from_reader(r);
        let mut values = Vec::with_capacity(rule.len());
        for rec in rd.records() {
            let rec = rec.map_err(csv_err)?;
            let v: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| YmbError::InvalidParams(e.to_string()))?;
            if v.len() != 16 {
                return Err(YmbError::InvalidParams(format!("expected 16 columns, got {}", v.len())));
            }
            values.push(std::array::from_fn(|j| {
                ImQuat::new(v[4 + 3 * j], v[5 + 3 * j], v[6 + 3 * j])
            }));
        }
        if values.len() != rule.len() {
            return Err(YmbError::GridMismatch(values.len(), rule.len()));
        }
        Ok(BoundaryForm {
            rule,
            values,
            lift: None,
        })
    }
}

fn csv_err(e: csv::Error) -> YmbError {
    YmbError::InvalidParams(e.to_string())
}

/// `c · xⁱ dxʲ` with `c ∈ Im ℍ` given by its `(i, j, k)` components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearTerm {
    pub x: usize,
    pub dx: usize,
    pub c: [f64; 3],
}

/// `c · xᵃ xᵇ dxʲ`; with `a ≠ b` the coefficient is a harmonic polynomial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticTerm {
    pub x: [usize; 2],
    pub dx: usize,
    pub c: [f64; 3],
}

/// Linear potentials with mixed Lie directions plus a scaled degree-2 perturbation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFamily {
    #[serde(default)]
    pub linear: Vec<LinearTerm>,
    #[serde(default)]
    pub quadratic: Vec<QuadraticTerm>,
    #[serde(default)]
    pub perturbation: f64,
}

impl BoundaryFamily {
    pub fn zero() -> Self {
        BoundaryFamily::default()
    }

    /// `x¹dx²·i`.
    pub fn single() -> Self {
        BoundaryFamily {
            linear: vec![LinearTerm {
                x: 1,
                dx: 2,
                c: [1.0, 0.0, 0.0],
            }],
            ..Default::default()
        }
    }

    /// `x¹dx²·i + x³dx⁰·j`.
    pub fn two_direction() -> Self {
        BoundaryFamily {
            linear: vec![
                LinearTerm {
                    x: 1,
                    dx: 2,
                    c: [1.0, 0.0, 0.0],
                },
                LinearTerm {
                    x: 3,
                    dx: 0,
                    c: [0.0, 1.0, 0.0],
                },
            ],
            ..Default::default()
        }
    }

    /// Three Lie directions in different planes plus a small perturbation.
    pub fn mixed() -> Self {
        BoundaryFamily {
            linear: vec![
                LinearTerm {
                    x: 1,
                    dx: 2,
                    c: [1.0, 0.0, 0.0],
                },
                LinearTerm {
                    x: 3,
                    dx: 0,
                    c: [0.0, 0.8, 0.0],
                },
                LinearTerm {
                    x: 0,
                    dx: 1,
                    c: [0.0, 0.0, 0.6],
                },
                LinearTerm {
                    x: 2,
                    dx: 3,
                    c: [0.3, 0.0, -0.4],
                },
            ],
            quadratic: vec![
                QuadraticTerm {
                    x: [0, 1],
                    dx: 3,
                    c: [1.0, 0.0, 0.0],
                },
                QuadraticTerm {
                    x: [2, 3],
                    dx: 1,
                    c: [0.0, 0.0, 1.0],
                },
            ],
            perturbation: 0.5,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "zero" => Some(Self::zero()),
            "single" => Some(Self::single()),
            "two-direction" => Some(Self::two_direction()),
            "mixed" => Some(Self::mixed()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = self.linear.iter().any(|t| t.x > 3 || t.dx > 3)
            || self.quadratic.iter().any(|t| t.x[0] > 3 || t.x[1] > 3 || t.dx > 3);
        if bad {
            return Err(YmbError::InvalidParams("boundary term index out of range".into()));
        }
        Ok(())
    }

    pub fn poly(&self) -> PolyForm1 {
        let deg = if self.quadratic.is_empty() { 1 } else { 2 };
        let mut p = PolyForm1::zeros(deg);
        for t in &self.linear {
            let mut e = [0u8; 4];
            e[t.x] += 1;
            p.add_term(e, t.dx, ImQuat::from_arr(t.c), 1.0);
        }
        for t in &self.quadratic {
            let mut e = [0u8; 4];
            e[t.x[0]] += 1;
            e[t.x[1]] += 1;
            p.add_term(e, t.dx, ImQuat::from_arr(t.c), self.perturbation);
        }
        p
    }

    pub fn boundary(&self, rule: &S3Rule) -> BoundaryForm {
        BoundaryForm::from_poly(rule, self.poly())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_data_is_tangential() {
        let rule = S3Rule::new(4);
        let b = BoundaryFamily::mixed().boundary(&rule);
        assert!(b.normal_defect() < 1e-14);
        assert!(b.sup_norm() > 0.1);
        assert_eq!(BoundaryFamily::zero().boundary(&rule).sup_norm(), 0.0);
    }

    #[test]
    fn csv_round_trip_and_hash_check() {
        let rule = S3Rule::new(3);
        let b = BoundaryFamily::two_direction().boundary(&rule);
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let back = BoundaryForm::read_csv(&buf[..]).unwrap();
        assert_eq!(back.values, b.values);
        assert_eq!(back.hash(), b.hash());
        let text = String::from_utf8(buf)
            .unwrap()
            .replacen("node_set_hash=", "node_set_hash=0", 1);
        assert!(BoundaryForm::read_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn least_squares_lift_reproduces_polynomial_data() {
        let rule = S3Rule::new(6);
        let b = BoundaryFamily::mixed().boundary(&rule);
        let bare = BoundaryForm {
            lift: None,
            ..b.clone()
        };
        let (_, resid) = bare.polynomial_lift(4).unwrap();
        assert!(resid < 1e-10, "{resid}");
    }

    #[test]
    fn bad_index_rejected() {
        let f = BoundaryFamily {
            linear: vec![LinearTerm {
                x: 4,
                dx: 0,
                c: [1.0, 0.0, 0.0],
            }],
            ..Default::default()
        };
        assert!(f.validate().is_err());
    }
}
