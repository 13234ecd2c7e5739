use crate::{Error, Result};

/// Counts of (true class, predicted class). Rows are true classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    names: Vec<String>,
    counts: Vec<u64>,
}

const CORNER: &str = "true\\predicted";

impl ConfusionMatrix {
    pub fn new(names: Vec<String>) -> Self {
        let k = names.len();
        Self {
            names,
            counts: vec![0; k * k],
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn classes(&self) -> usize {
        self.names.len()
    }

    pub fn add(&mut self, actual: usize, predicted: usize) {
        let k = self.classes();
        self.counts[actual * k + predicted] += 1;
    }

    pub fn count(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual * self.classes() + predicted]
    }

    pub fn row(&self, actual: usize) -> &[u64] {
        let k = self.classes();
        &self.counts[actual * k..(actual + 1) * k]
    }

    pub fn row_sum(&self, actual: usize) -> u64 {
        self.row(actual).iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes()).map(|c| self.count(c, c)).sum()
    }

    /// trace / total; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.correct() as f64 / t as f64,
        }
    }

    /// Share of class `c` samples predicted correctly, if any exist.
    pub fn class_rate(&self, c: usize) -> Option<f64> {
        match self.row_sum(c) {
            0 => None,
            n => Some(self.count(c, c) as f64 / n as f64),
        }
    }

    /// Where the misclassified samples of class `c` went, as fractions of
    /// the row's errors (all zeros when there are none).
    pub fn error_distribution(&self, c: usize) -> Vec<f64> {
        let errors = self.row_sum(c) - self.count(c, c);
        self.row(c)
            .iter()
            .enumerate()
            .map(|(p, &n)| if p == c || errors == 0 { 0.0 } else { n as f64 / errors as f64 })
            .collect()
    }

    /// Header row and first column hold class names; cells are integers.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header = std::iter::once(CORNER.to_string()).chain(self.names.iter().cloned());
        w.write_record(header).expect("in-memory write");
        for (c, name) in self.names.iter().enumerate() {
            let row = std::iter::once(name.clone()).chain(self.row(c).iter().map(u64::to_string));
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 fields")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Data(format!("confusion CSV: {m}"));
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
        let mut rows = r.records();
        let header = rows.next().ok_or_else(|| bad("empty".into()))?.map_err(|e| bad(e.to_string()))?;
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut m = Self::new(names);
        let mut seen = 0;
        for (c, row) in rows.enumerate() {
            let row = row.map_err(|e| bad(e.to_string()))?;
            if c >= m.classes() {
                return Err(bad(format!("more rows than the {} header classes", m.classes())));
            }
            if row.get(0) != Some(m.names[c].as_str()) {
                return Err(bad(format!("row {c} is labeled {:?}, expected {:?}", row.get(0), m.names[c])));
            }
            if row.len() != m.classes() + 1 {
                return Err(bad(format!("row {c} has {} cells", row.len() - 1)));
            }
            for (p, cell) in row.iter().skip(1).enumerate() {
                let k = m.classes();
                m.counts[c * k + p] = cell.parse().map_err(|e| bad(format!("row {c} cell {p}: {e}")))?;
            }
            seen += 1;
        }
        if seen != m.classes() {
            return Err(bad(format!("{seen} rows for {} classes", m.classes())));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_with_awkward_names() {
        let mut m = ConfusionMatrix::new(vec!["Dacia/Logan, Renault/Logan".into(), "say \"hi\"".into()]);
        m.add(0, 0);
        m.add(0, 1);
        m.add(1, 1);
        let back = ConfusionMatrix::from_csv(&m.to_csv()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.accuracy(), 2.0 / 3.0);
        assert_eq!(m.error_distribution(0), vec![0.0, 1.0]);
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(ConfusionMatrix::from_csv("x,a,b\na,1\nb,0,1\n").is_err());
    }
}
