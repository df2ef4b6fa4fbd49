//! Feature/label container shared by every split (train, unlabeled, test).

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Auxiliary column name carrying spurious-hypothesis labels.
pub const AUX_SPURIOUS: &str = "h_sp";
/// Auxiliary column name carrying group ids (true label crossed with spurious label).
pub const AUX_GROUP: &str = "group";
/// Auxiliary columns for the two planted hypotheses of the co-dependence task.
pub const AUX_HYP_A: &str = "h_a";
pub const AUX_HYP_B: &str = "h_b";

/// A feature matrix with optional ground-truth labels and named auxiliary
/// label columns (spurious labels, group ids, planted hypotheses).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y_true: Option<Vec<usize>>,
    pub y_aux: BTreeMap<String, Vec<usize>>,
}

impl Dataset {
    pub fn unlabeled(x: Matrix) -> Self {
        Self { x, y_true: None, y_aux: BTreeMap::new() }
    }

    pub fn labeled(x: Matrix, y_true: Vec<usize>) -> Result<Self> {
        let mut d = Self::unlabeled(x);
        d.set_labels(y_true)?;
        Ok(d)
    }

    pub fn set_labels(&mut self, y_true: Vec<usize>) -> Result<()> {
        if y_true.len() != self.x.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} rows",
                y_true.len(),
                self.x.rows()
            )));
        }
        self.y_true = Some(y_true);
        Ok(())
    }

    pub fn add_aux(&mut self, name: &str, labels: Vec<usize>) -> Result<()> {
        if labels.len() != self.x.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} aux labels for {} rows",
                labels.len(),
                self.x.rows()
            )));
        }
        self.y_aux.insert(name.to_string(), labels);
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.x.rows()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labels(&self) -> Result<&[usize]> {
        self.y_true.as_deref().ok_or(Error::MissingLabels)
    }

    pub fn aux(&self, name: &str) -> Result<&[usize]> {
        self.y_aux
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingAux(name.to_string()))
    }

    /// New dataset containing the listed rows (labels and aux columns follow).
    pub fn subset(&self, indices: &[usize]) -> Self {
        let pick = |v: &Vec<usize>| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self {
            x: self.x.gather_rows(indices),
            y_true: self.y_true.as_ref().map(pick),
            y_aux: self.y_aux.iter().map(|(k, v)| (k.clone(), pick(v))).collect(),
        }
    }

    /// Stacks two datasets row-wise. Labels survive only if both sides have
    /// them; aux columns only if present on both sides.
    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        if self.x.cols() != other.x.cols() {
            return Err(Error::DimensionMismatch("feature widths differ".into()));
        }
        let mut data = self.x.data().to_vec();
        data.extend_from_slice(other.x.data());
        let x = Matrix::new(self.len() + other.len(), self.x.cols(), data)?;
        let y_true = match (&self.y_true, &other.y_true) {
            (Some(a), Some(b)) => {
                let mut v = a.clone();
                v.extend_from_slice(b);
                Some(v)
            }
            _ => None,
        };
        let mut y_aux = BTreeMap::new();
        for (k, a) in &self.y_aux {
            if let Some(b) = other.y_aux.get(k) {
                let mut v = a.clone();
                v.extend_from_slice(b);
                y_aux.insert(k.clone(), v);
            }
        }
        Ok(Self { x, y_true, y_aux })
    }

    /// Writes the column-oriented text format: a header row naming feature
    /// columns `x0..x{d-1}`, then `y_true` if present, then each aux column
    /// as `aux:<name>`; one comma-separated row per sample.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let mut header: Vec<String> = (0..self.x.cols()).map(|c| format!("x{c}")).collect();
        if self.y_true.is_some() {
            header.push("y_true".into());
        }
        for name in self.y_aux.keys() {
            header.push(format!("aux:{name}"));
        }
        writeln!(w, "{}", header.join(","))?;
        for r in 0..self.len() {
            let mut fields: Vec<String> = self.x.row(r).iter().map(|v| format!("{v}")).collect();
            if let Some(y) = &self.y_true {
                fields.push(y[r].to_string());
            }
            for col in self.y_aux.values() {
                fields.push(col[r].to_string());
            }
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_to(&mut f)
    }

    pub fn read_from(r: &mut impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty dataset file".into()))??;
        let names: Vec<&str> = header.split(',').collect();
        let n_features = names.iter().take_while(|n| n.starts_with('x')).count();
        if n_features == 0 {
            return Err(Error::Parse("no feature columns in header".into()));
        }
        let has_labels = names.get(n_features) == Some(&"y_true");
        let aux_start = n_features + usize::from(has_labels);
        let aux_names: Vec<String> = names[aux_start..]
            .iter()
            .map(|n| {
                n.strip_prefix("aux:")
                    .map(str::to_string)
                    .ok_or_else(|| Error::Parse(format!("unexpected column {n:?}")))
            })
            .collect::<Result<_>>()?;

        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut y_true = Vec::new();
        let mut aux_cols: Vec<Vec<usize>> = vec![Vec::new(); aux_names.len()];
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != names.len() {
                return Err(Error::Parse(format!("row has {} fields, expected {}", fields.len(), names.len())));
            }
            let feat: Vec<f64> = fields[..n_features]
                .iter()
                .map(|f| f.parse().map_err(|_| Error::Parse(format!("bad float {f:?}"))))
                .collect::<Result<_>>()?;
            rows.push(feat);
            if has_labels {
                y_true.push(
                    fields[n_features]
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad label {:?}", fields[n_features])))?,
                );
            }
            for (col, f) in aux_cols.iter_mut().zip(&fields[aux_start..]) {
                col.push(f.parse().map_err(|_| Error::Parse(format!("bad aux value {f:?}")))?);
            }
        }
        let x = Matrix::from_rows(&rows)?;
        let mut d = Dataset::unlabeled(x);
        if has_labels {
            d.set_labels(y_true)?;
        }
        for (name, col) in aux_names.into_iter().zip(aux_cols) {
            d.add_aux(&name, col)?;
        }
        Ok(d)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(&mut std::io::BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dataset {
        let x = Matrix::from_rows(&[vec![0.25, -1.5], vec![3.0, 0.125]]).unwrap();
        let mut d = Dataset::labeled(x, vec![0, 1]).unwrap();
        d.add_aux(AUX_SPURIOUS, vec![1, 0]).unwrap();
        d.add_aux(AUX_GROUP, vec![1, 2]).unwrap();
        d
    }

    #[test]
    fn round_trips_through_text_format() {
        let d = sample();
        let mut buf = Vec::new();
        d.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x0,x1,y_true,aux:group,aux:h_sp\n"));
        let back = Dataset::read_from(&mut &buf[..]).unwrap();
        assert_eq!(d, back);
    }

    #[test]
    fn subset_and_concat() {
        let d = sample();
        let first = d.subset(&[0]);
        let second = d.subset(&[1]);
        assert_eq!(first.len(), 1);
        assert_eq!(first.aux(AUX_GROUP).unwrap(), &[1]);
        let whole = first.concat(&second).unwrap();
        assert_eq!(whole, d);
    }

    #[test]
    fn length_mismatches_rejected() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(Dataset::labeled(x.clone(), vec![0]).is_err());
        let mut d = Dataset::unlabeled(x);
        assert!(d.add_aux("g", vec![0, 1, 2]).is_err());
        assert!(d.labels().is_err());
        assert!(d.aux("missing").is_err());
    }
}
