//! Feature schemas, typed rows, dataset loading, stratified splitting and
//! the numeric encoding consumed by the forest.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::util::fnv1a;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Standard,
    Valuable,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tier::Standard => f.write_str("standard"),
            Tier::Valuable => f.write_str("valuable"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Range { lo: f64, hi: f64 },
    Categories(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub name: String,
    pub source: Option<String>,
    pub kind: FeatureKind,
    pub domain: Domain,
    pub integer: bool,
    pub mutable: bool,
    pub tier: Tier,
    pub themes: BTreeSet<String>,
}

impl Feature {
    pub fn numeric(name: &str, lo: f64, hi: f64) -> Self {
        Self {
            name: name.to_string(),
            source: None,
            kind: FeatureKind::Numeric,
            domain: Domain::Range { lo, hi },
            integer: false,
            mutable: true,
            tier: Tier::Standard,
            themes: BTreeSet::new(),
        }
    }

    pub fn categorical(name: &str, categories: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            source: None,
            kind: FeatureKind::Categorical,
            domain: Domain::Categories(categories.iter().map(|c| c.to_string()).collect()),
            integer: false,
            mutable: true,
            tier: Tier::Standard,
            themes: BTreeSet::new(),
        }
    }

    /// Binary feature; `categories[1]` encodes as 1.
    pub fn binary(name: &str, categories: [&str; 2]) -> Self {
        Self {
            kind: FeatureKind::Binary,
            ..Self::categorical(name, &categories)
        }
    }

    pub fn integer(mut self) -> Self {
        self.integer = true;
        self
    }

    pub fn immutable(mut self) -> Self {
        self.mutable = false;
        self
    }

    pub fn valuable(mut self) -> Self {
        self.tier = Tier::Valuable;
        self
    }

    pub fn with_themes(mut self, themes: &[&str]) -> Self {
        self.themes = themes.iter().map(|t| t.to_string()).collect();
        self
    }

    /// Number of encoded columns this feature occupies.
    pub fn width(&self) -> usize {
        match (&self.kind, &self.domain) {
            (FeatureKind::Categorical, Domain::Categories(c)) => c.len(),
            _ => 1,
        }
    }

    pub fn categories(&self) -> Option<&[String]> {
        match &self.domain {
            Domain::Categories(c) => Some(c),
            Domain::Range { .. } => None,
        }
    }

    pub fn contains(&self, value: &Value) -> bool {
        match (&self.domain, value) {
            (Domain::Range { lo, hi }, Value::Number(x)) => x.is_finite() && *lo <= *x && *x <= *hi,
            (Domain::Categories(c), Value::Category(i)) => *i < c.len(),
            _ => false,
        }
    }

    /// Parses a raw token into a domain-checked value.
    pub fn parse_value(&self, token: &str) -> Result<Value, String> {
        let value = match &self.domain {
            Domain::Range { lo, hi } => {
                let x: f64 = token
                    .parse()
                    .map_err(|_| format!("`{token}` is not a number"))?;
                if !(x.is_finite() && *lo <= x && x <= *hi) {
                    return Err(format!("{token} outside [{lo}, {hi}]"));
                }
                Value::Number(x)
            }
            Domain::Categories(c) => {
                let idx = c
                    .iter()
                    .position(|v| v == token)
                    .ok_or_else(|| format!("`{token}` is not one of {c:?}"))?;
                Value::Category(idx)
            }
        };
        Ok(value)
    }

    /// Renders a value using the schema's tokens.
    pub fn format_value(&self, value: &Value) -> String {
        match (value, &self.domain) {
            (Value::Category(i), Domain::Categories(c)) if *i < c.len() => c[*i].clone(),
            (Value::Number(x), _) => format_number(*x),
            (Value::Category(i), _) => format!("#{i}"),
        }
    }

    fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::Schema(format!("feature `{}`: {m}", self.name)));
        if self.name.is_empty() || self.name.contains(char::is_whitespace) || self.name.contains(',') {
            return bad("names must be non-empty without whitespace or commas");
        }
        match (&self.kind, &self.domain) {
            (FeatureKind::Numeric, Domain::Range { lo, hi }) => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return bad("numeric range needs lo < hi");
                }
            }
            (FeatureKind::Categorical, Domain::Categories(c)) => {
                let distinct: BTreeSet<_> = c.iter().collect();
                if c.len() < 2 || distinct.len() != c.len() {
                    return bad("categorical domains need at least 2 distinct values");
                }
            }
            (FeatureKind::Binary, Domain::Categories(c)) => {
                if c.len() != 2 || c[0] == c[1] {
                    return bad("binary features need exactly 2 distinct values");
                }
            }
            _ => return bad("domain does not match kind"),
        }
        Ok(())
    }
}

fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelSpec {
    pub column: String,
    pub positive: String,
    pub negative: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub name: String,
    pub features: Vec<Feature>,
    pub label: LabelSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchema {
    version: u32,
    name: String,
    label: RawLabel,
    feature: Vec<RawFeature>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLabel {
    column: String,
    positive: String,
    negative: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFeature {
    name: String,
    source: Option<String>,
    kind: FeatureKind,
    range: Option<[f64; 2]>,
    categories: Option<Vec<String>>,
    #[serde(default)]
    integer: bool,
    mutable: bool,
    tier: Tier,
    #[serde(default)]
    themes: Vec<String>,
}

impl Schema {
    pub fn new(name: &str, features: Vec<Feature>, label: LabelSpec) -> Result<Self, DataError> {
        let schema = Self {
            name: name.to_string(),
            features,
            label,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_toml(text: &str) -> Result<Self, DataError> {
        let raw: RawSchema = toml::from_str(text).map_err(|e| DataError::Schema(e.to_string()))?;
        if raw.version != SCHEMA_VERSION {
            return Err(DataError::Schema(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                raw.version
            )));
        }
        let mut features = Vec::with_capacity(raw.feature.len());
        for f in raw.feature {
            let domain = match (f.kind, f.range, f.categories) {
                (FeatureKind::Numeric, Some([lo, hi]), None) => Domain::Range { lo, hi },
                (FeatureKind::Categorical | FeatureKind::Binary, None, Some(c)) => Domain::Categories(c),
                _ => {
                    return Err(DataError::Schema(format!(
                        "feature `{}`: numeric features take `range`, categorical/binary take `categories`",
                        f.name
                    )))
                }
            };
            features.push(Feature {
                name: f.name,
                source: f.source,
                kind: f.kind,
                domain,
                integer: f.integer,
                mutable: f.mutable,
                tier: f.tier,
                themes: f.themes.into_iter().collect(),
            });
        }
        let label = LabelSpec {
            column: raw.label.column,
            positive: raw.label.positive,
            negative: raw.label.negative,
        };
        Self::new(&raw.name, features, label)
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    fn validate(&self) -> Result<(), DataError> {
        if self.features.is_empty() {
            return Err(DataError::Schema("no features".into()));
        }
        let mut names = BTreeSet::new();
        for f in &self.features {
            f.validate()?;
            if !names.insert(f.name.as_str()) {
                return Err(DataError::Schema(format!("duplicate feature `{}`", f.name)));
            }
        }
        if self.label.positive == self.label.negative {
            return Err(DataError::Schema("label tokens must differ".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn feature(&self, name: &str) -> Option<&Feature> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn valuable_features(&self) -> BTreeSet<String> {
        self.features
            .iter()
            .filter(|f| f.tier == Tier::Valuable)
            .map(|f| f.name.clone())
            .collect()
    }

    /// Theme tag → features carrying it. Every key maps to at least one feature.
    pub fn themes(&self) -> BTreeMap<String, BTreeSet<String>> {
        let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for f in &self.features {
            for t in &f.themes {
                out.entry(t.clone()).or_default().insert(f.name.clone());
            }
        }
        out
    }

    /// Total number of encoded columns.
    pub fn encoded_width(&self) -> usize {
        self.features.iter().map(Feature::width).sum()
    }

    /// Offset of each feature's first encoded column.
    pub fn encoded_offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.features
            .iter()
            .map(|f| {
                let at = acc;
                acc += f.width();
                at
            })
            .collect()
    }

    /// Stable digest of everything that affects the encoding.
    pub fn fingerprint(&self) -> u64 {
        let mut canon = String::new();
        for f in &self.features {
            canon.push_str(&f.name);
            canon.push('|');
            match &f.domain {
                Domain::Range { lo, hi } => canon.push_str(&format!("num:{lo}:{hi}")),
                Domain::Categories(c) => {
                    canon.push_str(if f.kind == FeatureKind::Binary { "bin:" } else { "cat:" });
                    canon.push_str(&c.join(","));
                }
            }
            canon.push('\n');
        }
        fnv1a(canon.as_bytes())
    }

    /// Checks that an instance has one in-domain value per feature.
    pub fn conform(&self, instance: &Instance) -> Result<(), DataError> {
        if instance.values.len() != self.features.len() {
            return Err(DataError::Conformance(format!(
                "instance `{}` has {} values, schema has {} features",
                instance.id,
                instance.values.len(),
                self.features.len()
            )));
        }
        for (f, v) in self.features.iter().zip(&instance.values) {
            if !f.contains(v) {
                return Err(DataError::Conformance(format!(
                    "instance `{}`: value {v:?} outside domain of `{}`",
                    instance.id, f.name
                )));
            }
        }
        Ok(())
    }

    /// Numeric encoding in schema order: numeric values pass through,
    /// categorical values become one indicator per category, binary values
    /// map to {0, 1}.
    pub fn encode(&self, instance: &Instance) -> Result<Vec<f64>, DataError> {
        self.conform(instance)?;
        let mut out = Vec::with_capacity(self.encoded_width());
        self.encode_values_into(&instance.values, &mut out);
        Ok(out)
    }

    /// Unchecked encoding of already-validated values into `out`.
    pub(crate) fn encode_values_into(&self, values: &[Value], out: &mut Vec<f64>) {
        out.clear();
        for (f, v) in self.features.iter().zip(values) {
            match (f.kind, v) {
                (FeatureKind::Numeric, Value::Number(x)) => out.push(*x),
                (FeatureKind::Binary, Value::Category(i)) => out.push(*i as f64),
                (FeatureKind::Categorical, Value::Category(i)) => {
                    let start = out.len();
                    out.resize(start + f.width(), 0.0);
                    out[start + *i] = 1.0;
                }
                _ => unreachable!("conformance checked by caller"),
            }
        }
    }

    /// Inverse of [`Schema::encode`].
    pub fn decode(&self, encoded: &[f64]) -> Result<Vec<Value>, DataError> {
        if encoded.len() != self.encoded_width() {
            return Err(DataError::Conformance(format!(
                "encoded width {} != {}",
                encoded.len(),
                self.encoded_width()
            )));
        }
        let mut at = 0;
        let mut values = Vec::with_capacity(self.features.len());
        for f in &self.features {
            let w = f.width();
            let cols = &encoded[at..at + w];
            let v = match f.kind {
                FeatureKind::Numeric => Value::Number(cols[0]),
                FeatureKind::Binary if cols[0] == 0.0 || cols[0] == 1.0 => Value::Category(cols[0] as usize),
                FeatureKind::Categorical
                    if cols.iter().filter(|&&c| c == 1.0).count() == 1
                        && cols.iter().all(|&c| c == 0.0 || c == 1.0) =>
                {
                    Value::Category(cols.iter().position(|&c| c == 1.0).unwrap())
                }
                _ => {
                    return Err(DataError::Conformance(format!(
                        "columns for `{}` are not a valid indicator encoding",
                        f.name
                    )))
                }
            };
            values.push(v);
            at += w;
        }
        Ok(values)
    }
}

/// A single feature value. Categorical and binary values hold the index of
/// their category in the feature's domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Number(f64),
    Category(usize),
}

impl Value {
    /// Bit-exact key for hashing and ordering.
    pub(crate) fn key(&self) -> u64 {
        match self {
            Value::Number(x) => x.to_bits(),
            Value::Category(i) => (*i as u64) | (1 << 63) | (1 << 62),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: String,
    pub values: Vec<Value>,
}

impl Instance {
    pub fn new(id: impl Into<String>, values: Vec<Value>) -> Self {
        Self { id: id.into(), values }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub schema: Arc<Schema>,
    pub rows: Vec<Instance>,
    /// `true` = positive class (creditworthy / suitable).
    pub labels: Vec<bool>,
}

impl Dataset {
    /// Builds a dataset, validating row conformance and label count.
    pub fn new(schema: Arc<Schema>, rows: Vec<Instance>, labels: Vec<bool>) -> Result<Self, DataError> {
        if rows.len() != labels.len() {
            return Err(DataError::Conformance(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        for r in &rows {
            schema.conform(r)?;
        }
        Ok(Self { schema, rows, labels })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let p = self.positives();
        p > 0 && p < self.len()
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: Arc::clone(&self.schema),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn encoded(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| {
                let mut v = Vec::new();
                self.schema.encode_values_into(&r.values, &mut v);
                v
            })
            .collect()
    }
}

/// Loads a delimiter-separated file (comma or whitespace, detected from the
/// first data line). The last column is the label. A leading header line
/// naming the columns is skipped; `#` lines and blank lines are ignored.
/// Instance ids are 1-based data row ordinals.
pub fn load_dataset(path: &Path, schema: Arc<Schema>) -> Result<Dataset, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(&text, schema)
}

pub fn parse_dataset(text: &str, schema: Arc<Schema>) -> Result<Dataset, DataError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect();
    let Some(&(_, first)) = lines.first() else {
        return Err(DataError::NoRows);
    };
    let comma = first.contains(',');
    let split = |line: &str| -> Vec<String> {
        if comma {
            line.split(',').map(|t| t.trim().to_string()).collect()
        } else {
            line.split_whitespace().map(str::to_string).collect()
        }
    };

    let expected = schema.len() + 1;
    let header: Vec<String> = schema
        .features
        .iter()
        .map(|f| f.name.clone())
        .chain(std::iter::once(schema.label.column.clone()))
        .collect();
    let skip = usize::from(split(first) == header);

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for &(line_no, line) in &lines[skip..] {
        let tokens = split(line);
        if tokens.len() != expected {
            return Err(DataError::ColumnCount {
                row: line_no,
                expected,
                found: tokens.len(),
            });
        }
        let mut values = Vec::with_capacity(schema.len());
        for (f, tok) in schema.features.iter().zip(&tokens) {
            let v = f.parse_value(tok).map_err(|message| DataError::Domain {
                row: line_no,
                column: f.name.clone(),
                message,
            })?;
            values.push(v);
        }
        let label_tok = &tokens[expected - 1];
        let label = if *label_tok == schema.label.positive {
            true
        } else if *label_tok == schema.label.negative {
            false
        } else {
            return Err(DataError::Domain {
                row: line_no,
                column: schema.label.column.clone(),
                message: format!(
                    "label `{label_tok}` is neither `{}` nor `{}`",
                    schema.label.positive, schema.label.negative
                ),
            });
        };
        rows.push(Instance::new((rows.len() + 1).to_string(), values));
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(DataError::NoRows);
    }
    let ds = Dataset { schema, rows, labels };
    if !ds.has_both_classes() {
        return Err(DataError::SingleClass);
    }
    Ok(ds)
}

/// Stratified, seeded train/test split. The test set holds
/// `round(test_fraction * N)` rows, apportioned across classes by largest
/// remainder; both parts keep file order.
pub fn split(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::Fraction(test_fraction));
    }
    if dataset.is_empty() {
        return Err(DataError::NoRows);
    }
    let n = dataset.len();
    let n_test = (test_fraction * n as f64).round() as usize;

    let classes: [Vec<usize>; 2] = [
        (0..n).filter(|&i| dataset.labels[i]).collect(),
        (0..n).filter(|&i| !dataset.labels[i]).collect(),
    ];
    let quotas = apportion(n_test, [classes[0].len(), classes[1].len()], test_fraction);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_test = vec![false; n];
    for (members, quota) in classes.iter().zip(quotas) {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        for &i in &shuffled[..quota] {
            in_test[i] = true;
        }
    }
    let test: Vec<usize> = (0..n).filter(|&i| in_test[i]).collect();
    let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
    Ok((dataset.subset(&train), dataset.subset(&test)))
}

/// Largest-remainder allocation of `total` across two classes.
fn apportion(total: usize, sizes: [usize; 2], fraction: f64) -> [usize; 2] {
    let exact = [sizes[0] as f64 * fraction, sizes[1] as f64 * fraction];
    let mut quota = [exact[0].floor() as usize, exact[1].floor() as usize];
    let mut order = [0usize, 1];
    // Larger remainder first; ties go to the larger class.
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(sizes[b].cmp(&sizes[a]))
    });
    let mut k = 0;
    while quota[0] + quota[1] < total {
        let c = order[k % 2];
        if quota[c] < sizes[c] {
            quota[c] += 1;
        }
        k += 1;
    }
    quota
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_schema() -> Schema {
        Schema::new(
            "toy",
            vec![
                Feature::numeric("Amount", 0.0, 100.0),
                Feature::categorical("Color", &["red", "green", "blue"]),
                Feature::binary("Phone", ["no", "yes"]),
            ],
            LabelSpec {
                column: "y".into(),
                positive: "1".into(),
                negative: "0".into(),
            },
        )
        .unwrap()
    }

    #[test]
    fn encodes_numeric_categorical_binary() {
        let s = toy_schema();
        let inst = Instance::new("a", vec![Value::Number(42.0), Value::Category(1), Value::Category(1)]);
        assert_eq!(s.encode(&inst).unwrap(), vec![42.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(s.encoded_width(), 5);
        assert_eq!(s.encoded_offsets(), vec![0, 1, 4]);
        assert_eq!(s.decode(&[42.0, 0.0, 1.0, 0.0, 1.0]).unwrap(), inst.values);
    }

    #[test]
    fn rejects_invalid_indicator_block() {
        let s = toy_schema();
        assert!(s.decode(&[1.0, 1.0, 1.0, 0.0, 0.0]).is_err());
        assert!(s.decode(&[1.0, 0.0, 1.0, 0.0, 0.5]).is_err());
    }

    #[test]
    fn schema_rejects_bad_domains() {
        let label = LabelSpec {
            column: "y".into(),
            positive: "1".into(),
            negative: "0".into(),
        };
        assert!(Schema::new("s", vec![Feature::numeric("x", 1.0, 1.0)], label.clone()).is_err());
        assert!(Schema::new("s", vec![Feature::categorical("c", &["a"])], label.clone()).is_err());
        assert!(Schema::new("s", vec![Feature::categorical("c", &["a", "a"])], label.clone()).is_err());
        let dup = vec![Feature::numeric("x", 0.0, 1.0), Feature::numeric("x", 0.0, 1.0)];
        assert!(Schema::new("s", dup, label).is_err());
    }

    #[test]
    fn parses_whitespace_and_comma_files() {
        let s = Arc::new(toy_schema());
        let ws = parse_dataset("10 red no 1\n20 blue yes 0\n", Arc::clone(&s)).unwrap();
        let cs = parse_dataset("Amount,Color,Phone,y\n10, red, no, 1\n20,blue,yes,0\n", s).unwrap();
        assert_eq!(ws.rows, cs.rows);
        assert_eq!(ws.labels, vec![true, false]);
        assert_eq!(ws.rows[1].id, "2");
    }

    #[test]
    fn empty_file_has_no_rows() {
        let s = Arc::new(toy_schema());
        let err = parse_dataset("\n# comment only\n", s).unwrap_err();
        assert_eq!(err.to_string(), "no rows");
    }

    #[test]
    fn out_of_domain_category_names_row_and_column() {
        let s = Arc::new(toy_schema());
        let err = parse_dataset("10 red no 1\n20 purple yes 0\n", s).unwrap_err();
        match err {
            DataError::Domain { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "Color");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn column_count_mismatch() {
        let s = Arc::new(toy_schema());
        assert!(matches!(
            parse_dataset("10 red 1\n", s).unwrap_err(),
            DataError::ColumnCount { row: 1, expected: 4, found: 3 }
        ));
    }

    #[test]
    fn stratified_split_of_ten() {
        let s = Arc::new(toy_schema());
        let rows: Vec<Instance> = (0..10)
            .map(|i| Instance::new(i.to_string(), vec![Value::Number(i as f64), Value::Category(0), Value::Category(0)]))
            .collect();
        let labels = vec![true, true, true, true, true, true, true, false, false, false];
        let ds = Dataset::new(s, rows, labels).unwrap();
        for seed in 0..20 {
            let (train, test) = split(&ds, 0.3, seed).unwrap();
            assert_eq!(test.len(), 3);
            assert_eq!(train.len(), 7);
            assert_eq!(test.positives(), 2);
        }
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let s = Arc::new(toy_schema());
        let ds = parse_dataset("10 red no 1\n20 blue yes 0\n", s).unwrap();
        assert!(matches!(split(&ds, 0.0, 1), Err(DataError::Fraction(_))));
        assert!(matches!(split(&ds, 1.0, 1), Err(DataError::Fraction(_))));
    }

    #[test]
    fn apportion_sums_to_total() {
        assert_eq!(apportion(330, [700, 300], 0.33), [231, 99]);
        assert_eq!(apportion(3, [7, 3], 0.3), [2, 1]);
    }
}
