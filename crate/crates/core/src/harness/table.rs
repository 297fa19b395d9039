//! Result tables: one row per measured quantity, with the rule that turns it into a verdict.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Monte Carlo quantities are compared with this many standard errors of slack.
pub const SE_MULTIPLIER: f64 = 3.0;

pub const HEADER: [&str; 11] = [
    "experiment",
    "check",
    "case_id",
    "quantity",
    "value",
    "std_error",
    "replicas",
    "reference",
    "tolerance",
    "rule",
    "verdict",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    /// Recorded for reading; no verdict.
    Info,
    /// `value` is 1 when a property holds and 0 otherwise.
    Holds,
    /// `value ≤ reference + tolerance + 3 s.e.`
    AtMost,
    /// `|value - reference| ≤ tolerance + 3 s.e.`
    Within,
}

impl Rule {
    fn as_str(self) -> &'static str {
        match self {
            Rule::Info => "info",
            Rule::Holds => "holds",
            Rule::AtMost => "at-most",
            Rule::Within => "within",
        }
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "info" => Ok(Rule::Info),
            "holds" => Ok(Rule::Holds),
            "at-most" => Ok(Rule::AtMost),
            "within" => Ok(Rule::Within),
            _ => Err(Error::SchemaMismatch(format!("unknown rule {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Info,
}

impl Verdict {
    fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Info => "info",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub experiment: String,
    /// The acceptance check this row contributes to.
    pub check: String,
    pub case_id: String,
    pub quantity: String,
    pub value: f64,
    /// Present exactly for Monte Carlo estimates.
    pub std_error: Option<f64>,
    pub replicas: usize,
    pub reference: f64,
    pub tolerance: f64,
    pub rule: Rule,
}

impl Row {
    pub fn info(experiment: &str, check: &str, case_id: impl Into<String>, quantity: &str, value: f64) -> Self {
        Row {
            experiment: experiment.into(),
            check: check.into(),
            case_id: case_id.into(),
            quantity: quantity.into(),
            value,
            std_error: None,
            replicas: 0,
            reference: 0.0,
            tolerance: 0.0,
            rule: Rule::Info,
        }
    }

    pub fn holds(experiment: &str, check: &str, case_id: impl Into<String>, quantity: &str, ok: bool) -> Self {
        Row { rule: Rule::Holds, ..Row::info(experiment, check, case_id, quantity, if ok { 1.0 } else { 0.0 }) }
    }

    pub fn at_most(
        experiment: &str,
        check: &str,
        case_id: impl Into<String>,
        quantity: &str,
        value: f64,
        reference: f64,
    ) -> Self {
        Row { rule: Rule::AtMost, reference, ..Row::info(experiment, check, case_id, quantity, value) }
    }

    pub fn within(
        experiment: &str,
        check: &str,
        case_id: impl Into<String>,
        quantity: &str,
        value: f64,
        reference: f64,
        tolerance: f64,
    ) -> Self {
        Row { rule: Rule::Within, reference, tolerance, ..Row::info(experiment, check, case_id, quantity, value) }
    }

    /// Attaches a Monte Carlo standard error.
    pub fn with_mc(mut self, std_error: f64, replicas: usize) -> Self {
        self.std_error = Some(std_error);
        self.replicas = replicas;
        self
    }

    pub fn with_replicas(mut self, replicas: usize) -> Self {
        self.replicas = replicas;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn verdict(&self) -> Verdict {
        let slack = self.tolerance + SE_MULTIPLIER * self.std_error.unwrap_or(0.0);
        let ok = match self.rule {
            Rule::Info => return Verdict::Info,
            Rule::Holds => self.value == 1.0,
            Rule::AtMost => self.value <= self.reference + slack,
            Rule::Within => (self.value - self.reference).abs() <= slack,
        };
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    fn key(&self) -> (String, String, String, String) {
        (self.experiment.clone(), self.check.clone(), self.case_id.clone(), self.quantity.clone())
    }

    /// Pools two rows of the same quantity. Monte Carlo rows combine means and variances
    /// (Chan et al.); other rows keep the less favourable value.
    fn merge(&self, other: &Row) -> Result<Row> {
        if self.rule != other.rule || self.reference != other.reference || self.tolerance != other.tolerance {
            return Err(Error::SchemaMismatch(format!(
                "rows {}/{}/{} disagree on rule, reference or tolerance",
                self.experiment, self.case_id, self.quantity
            )));
        }
        let replicas = self.replicas + other.replicas;
        let mut out = self.clone();
        out.replicas = replicas;
        match (self.std_error, other.std_error) {
            (Some(sa), Some(sb)) => {
                let (na, nb) = (self.replicas as f64, other.replicas as f64);
                let n = na + nb;
                let delta = other.value - self.value;
                let m2 = sa * sa * na * (na - 1.0) + sb * sb * nb * (nb - 1.0) + delta * delta * na * nb / n;
                out.value = (na * self.value + nb * other.value) / n;
                out.std_error = Some((m2 / (n - 1.0) / n).sqrt());
            }
            (None, None) => {
                out.value = match self.rule {
                    Rule::Holds => self.value.min(other.value),
                    Rule::AtMost => self.value.max(other.value),
                    Rule::Within => {
                        let (da, db) = ((self.value - self.reference).abs(), (other.value - other.reference).abs());
                        if da > db || (da == db && self.value < other.value) {
                            self.value
                        } else {
                            other.value
                        }
                    }
                    Rule::Info => {
                        let (wa, wb) = (self.replicas.max(1) as f64, other.replicas.max(1) as f64);
                        (wa * self.value + wb * other.value) / (wa + wb)
                    }
                };
            }
            _ => {
                return Err(Error::SchemaMismatch(format!(
                    "row {}/{}/{} is Monte Carlo in one table only",
                    self.experiment, self.case_id, self.quantity
                )))
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<Row>,
}

impl ResultTable {
    pub fn new() -> Self {
        ResultTable::default()
    }

    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: ResultTable) {
        self.rows.extend(other.rows);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn failures(&self) -> Vec<&Row> {
        self.rows.iter().filter(|r| r.verdict() == Verdict::Fail).collect()
    }

    pub fn all_pass(&self) -> bool {
        self.failures().is_empty()
    }

    /// Verdict of one acceptance check: it passes when it has at least one judged row and
    /// none of them fails.
    pub fn check_verdict(&self, check: &str) -> Verdict {
        let judged: Vec<Verdict> =
            self.rows.iter().filter(|r| r.check == check).map(Row::verdict).filter(|v| *v != Verdict::Info).collect();
        if judged.is_empty() {
            Verdict::Info
        } else if judged.iter().all(|v| *v == Verdict::Pass) {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    /// Row-wise pooling keyed by `(experiment, check, case_id, quantity)`. Rows keep the
    /// order of first appearance; pooled values do not depend on the argument order.
    pub fn merge(&self, other: &ResultTable) -> Result<ResultTable> {
        let mut rows: Vec<Row> = Vec::with_capacity(self.rows.len() + other.rows.len());
        let mut index: HashMap<_, usize> = HashMap::new();
        for row in self.rows.iter().chain(&other.rows) {
            match index.get(&row.key()) {
                Some(&i) => rows[i] = rows[i].merge(row)?,
                None => {
                    index.insert(row.key(), rows.len());
                    rows.push(row.clone());
                }
            }
        }
        Ok(ResultTable { rows })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(HEADER)?;
        for r in &self.rows {
            out.write_record([
                r.experiment.clone(),
                r.check.clone(),
                r.case_id.clone(),
                r.quantity.clone(),
                format!("{:e}", r.value),
                r.std_error.map(|s| format!("{s:e}")).unwrap_or_default(),
                r.replicas.to_string(),
                format!("{:e}", r.reference),
                format!("{:e}", r.tolerance),
                r.rule.as_str().to_string(),
                r.verdict().as_str().to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<ResultTable> {
        let mut input = csv::Reader::from_reader(r);
        let header = input.headers()?.clone();
        if header.iter().ne(HEADER.iter().copied()) {
            return Err(Error::SchemaMismatch(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
        }
        let float = |s: &str, what: &str| {
            s.parse::<f64>().map_err(|_| Error::SchemaMismatch(format!("column {what}: cannot parse {s:?}")))
        };
        let mut table = ResultTable::new();
        for record in input.records() {
            let rec = record?;
            let row = Row {
                experiment: rec[0].to_string(),
                check: rec[1].to_string(),
                case_id: rec[2].to_string(),
                quantity: rec[3].to_string(),
                value: float(&rec[4], "value")?,
                std_error: if rec[5].is_empty() { None } else { Some(float(&rec[5], "std_error")?) },
                replicas: rec[6]
                    .parse()
                    .map_err(|_| Error::SchemaMismatch(format!("column replicas: cannot parse {:?}", &rec[6])))?,
                reference: float(&rec[7], "reference")?,
                tolerance: float(&rec[8], "tolerance")?,
                rule: rec[9].parse()?,
            };
            table.push(row);
        }
        Ok(table)
    }
}
