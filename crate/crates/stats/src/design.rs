//! Named design matrices: intercept, scaled continuous columns, reference
//! coded dummies and two-way interaction dummies.

use std::collections::BTreeSet;

use nalgebra::DMatrix;

use crate::error::{Result, StatsError};

pub const INTERCEPT: &str = "(Intercept)";

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub names: Vec<String>,
    /// n x k, first column is the intercept.
    pub x: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Keeps the listed columns in the given order.
    pub fn select(&self, columns: &[usize]) -> DesignMatrix {
        DesignMatrix {
            names: columns.iter().map(|&j| self.names[j].clone()).collect(),
            x: self.x.select_columns(columns),
        }
    }

    /// Keeps the named columns, in design order.
    pub fn select_named(&self, names: &[&str]) -> Result<DesignMatrix> {
        for n in names {
            if self.column_index(n).is_none() {
                return Err(StatsError::UnknownColumn(n.to_string()));
            }
        }
        let keep: Vec<usize> = (0..self.ncols()).filter(|&j| names.contains(&self.names[j].as_str())).collect();
        Ok(self.select(&keep))
    }

    /// Drops the named columns if present.
    pub fn without(&self, names: &[&str]) -> DesignMatrix {
        let keep: Vec<usize> = (0..self.ncols()).filter(|&j| !names.contains(&self.names[j].as_str())).collect();
        self.select(&keep)
    }

    pub fn rows(&self, rows: &[usize]) -> DesignMatrix {
        DesignMatrix { names: self.names.clone(), x: self.x.select_rows(rows) }
    }
}

pub fn dummy_name(var: &str, level: &str) -> String {
    format!("{var}={level}")
}

pub fn interaction_name(a: &str, la: &str, b: &str, lb: &str) -> String {
    format!("{}:{}", dummy_name(a, la), dummy_name(b, lb))
}

/// Builds a design matrix column by column. Levels of a categorical variable
/// get dummies in sorted order; the reference level gets none.
#[derive(Debug, Clone)]
pub struct DesignBuilder {
    n: usize,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    dropped: Vec<String>,
}

impl DesignBuilder {
    pub fn new(n: usize) -> Self {
        Self { n, names: vec![INTERCEPT.to_string()], columns: vec![vec![1.0; n]], dropped: Vec::new() }
    }

    fn check(&self, len: usize, what: &str) -> Result<()> {
        if len == self.n {
            Ok(())
        } else {
            Err(StatsError::Dimension(format!("{what}: {len} values for {} rows", self.n)))
        }
    }

    /// Adds `values / increment`, so the coefficient is per `increment` units.
    pub fn continuous(mut self, name: &str, values: &[f64], increment: f64) -> Result<Self> {
        self.check(values.len(), name)?;
        self.names.push(name.to_string());
        self.columns.push(values.iter().map(|v| v / increment).collect());
        Ok(self)
    }

    /// Adds `values / increment` after subtracting `center`.
    pub fn centered(mut self, name: &str, values: &[f64], center: f64, increment: f64) -> Result<Self> {
        self.check(values.len(), name)?;
        self.names.push(name.to_string());
        self.columns.push(values.iter().map(|v| (v - center) / increment).collect());
        Ok(self)
    }

    pub fn binary(mut self, name: &str, values: &[bool]) -> Result<Self> {
        self.check(values.len(), name)?;
        self.names.push(name.to_string());
        self.columns.push(values.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect());
        Ok(self)
    }

    /// Reference-coded dummies for every observed level other than `reference`.
    pub fn categorical<S: AsRef<str>>(mut self, name: &str, values: &[S], reference: &str) -> Result<Self> {
        self.check(values.len(), name)?;
        let levels: BTreeSet<&str> = values.iter().map(AsRef::as_ref).filter(|l| *l != reference).collect();
        for level in levels {
            self.names.push(dummy_name(name, level));
            self.columns.push(values.iter().map(|v| if v.as_ref() == level { 1.0 } else { 0.0 }).collect());
        }
        Ok(self)
    }

    /// Products of the non-reference dummies of two categorical variables.
    /// Combinations never observed give all-zero columns and are dropped;
    /// their names are reported by [`DesignBuilder::dropped`].
    pub fn interaction<S: AsRef<str>, T: AsRef<str>>(
        mut self,
        a: (&str, &[S], &str),
        b: (&str, &[T], &str),
    ) -> Result<Self> {
        let (an, av, ar) = a;
        let (bn, bv, br) = b;
        self.check(av.len(), an)?;
        self.check(bv.len(), bn)?;
        let la: BTreeSet<&str> = av.iter().map(AsRef::as_ref).filter(|l| *l != ar).collect();
        let lb: BTreeSet<&str> = bv.iter().map(AsRef::as_ref).filter(|l| *l != br).collect();
        for x in &la {
            for y in &lb {
                let col: Vec<f64> = av
                    .iter()
                    .zip(bv)
                    .map(|(p, q)| if p.as_ref() == *x && q.as_ref() == *y { 1.0 } else { 0.0 })
                    .collect();
                let name = interaction_name(an, x, bn, y);
                if col.iter().all(|v| *v == 0.0) {
                    self.dropped.push(name);
                } else {
                    self.names.push(name);
                    self.columns.push(col);
                }
            }
        }
        Ok(self)
    }

    pub fn dropped(&self) -> &[String] {
        &self.dropped
    }

    pub fn build(self) -> DesignMatrix {
        let k = self.columns.len();
        let x = DMatrix::from_fn(self.n, k, |i, j| self.columns[j][i]);
        DesignMatrix { names: self.names, x }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_coding() {
        let sex = ["Male", "Female", "Female"];
        let d = DesignBuilder::new(3).categorical("sex", &sex, "Male").unwrap().build();
        assert_eq!(d.names, vec![INTERCEPT, "sex=Female"]);
        assert_eq!(d.x.column(1).as_slice(), &[0.0, 1.0, 1.0]);
    }

    #[test]
    fn increments_and_centering() {
        let d = DesignBuilder::new(2)
            .continuous("age", &[50.0, 60.0], 5.0)
            .unwrap()
            .centered("bmi", &[30.0, 20.0], 25.0, 5.0)
            .unwrap()
            .build();
        assert_eq!(d.x.column(1).as_slice(), &[10.0, 12.0]);
        assert_eq!(d.x.column(2).as_slice(), &[1.0, -1.0]);
    }

    #[test]
    fn interaction_drops_empty_cells() {
        let m = ["CT", "MRI", "MRI", "PET"];
        let b = ["Chest", "Neck", "Chest", "Chest"];
        let builder = DesignBuilder::new(4)
            .categorical("m", &m, "CT")
            .unwrap()
            .categorical("b", &b, "Chest")
            .unwrap()
            .interaction(("m", &m, "CT"), ("b", &b, "Chest"))
            .unwrap();
        assert_eq!(builder.dropped(), &["m=PET:b=Neck".to_string()]);
        let d = builder.build();
        assert!(d.names.contains(&"m=MRI:b=Neck".to_string()));
        assert_eq!(d.x.column(d.column_index("m=MRI:b=Neck").unwrap()).as_slice(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn length_mismatch() {
        assert!(DesignBuilder::new(2).continuous("x", &[1.0], 1.0).is_err());
    }

    #[test]
    fn selection() {
        let d = DesignBuilder::new(2).continuous("x", &[1.0, 2.0], 1.0).unwrap().build();
        assert_eq!(d.without(&["x"]).names, vec![INTERCEPT]);
        assert!(d.select_named(&["y"]).is_err());
    }
}
