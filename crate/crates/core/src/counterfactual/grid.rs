use crate::tabular::{Dataset, Domain, Feature, Schema, Value};

/// Candidate replacement values per feature, in schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalGrid {
    values: Vec<Vec<Value>>,
}

impl ProposalGrid {
    /// Numeric features get `points` nearest-rank quantiles of the observed
    /// column (levels 0, 1/(points-1), ..., 1); categorical and binary
    /// features get every category.
    pub fn from_dataset(data: &Dataset, points: usize) -> Self {
        let points = points.max(2);
        let values = data
            .schema
            .features
            .iter()
            .enumerate()
            .map(|(j, f)| match &f.domain {
                Domain::Categories(c) => (0..c.len()).map(Value::Category).collect(),
                Domain::Range { .. } => {
                    let mut col: Vec<f64> = data
                        .rows
                        .iter()
                        .filter_map(|r| match r.values[j] {
                            Value::Number(x) => Some(x),
                            Value::Category(_) => None,
                        })
                        .collect();
                    col.sort_by(f64::total_cmp);
                    if col.is_empty() {
                        return domain_points(f, points);
                    }
                    let last = col.len() - 1;
                    let mut qs: Vec<f64> = (0..points)
                        .map(|i| col[(i as f64 / (points - 1) as f64 * last as f64).round() as usize])
                        .collect();
                    qs.dedup();
                    qs.into_iter().map(Value::Number).collect()
                }
            })
            .collect();
        Self { values }
    }

    /// Numeric features get `points` evenly spaced values over their
    /// declared range (rounded for integer features).
    pub fn from_domain(schema: &Schema, points: usize) -> Self {
        let points = points.max(2);
        let values = schema
            .features
            .iter()
            .map(|f| match &f.domain {
                Domain::Categories(c) => (0..c.len()).map(Value::Category).collect(),
                Domain::Range { .. } => domain_points(f, points),
            })
            .collect();
        Self { values }
    }

    /// Replaces the proposals of one feature.
    pub fn set(&mut self, feature: usize, values: Vec<Value>) {
        self.values[feature] = values;
    }

    pub fn values(&self, feature: usize) -> &[Value] {
        &self.values[feature]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn domain_points(f: &Feature, points: usize) -> Vec<Value> {
    let Domain::Range { lo, hi } = f.domain else {
        unreachable!("numeric feature")
    };
    let mut out: Vec<f64> = (0..points)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            if f.integer {
                x.round()
            } else {
                x
            }
        })
        .collect();
    out.dedup();
    out.into_iter().map(Value::Number).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{Instance, LabelSpec};
    use std::sync::Arc;

    fn schema() -> Schema {
        Schema::new(
            "g",
            vec![
                Feature::numeric("Years", 0.0, 20.0).integer(),
                Feature::categorical("C", &["a", "b", "c"]),
            ],
            LabelSpec { column: "y".into(), positive: "1".into(), negative: "0".into() },
        )
        .unwrap()
    }

    #[test]
    fn integer_domain_grid() {
        let g = ProposalGrid::from_domain(&schema(), 21);
        assert_eq!(g.values(0).len(), 21);
        assert_eq!(g.values(0)[3], Value::Number(3.0));
        assert_eq!(g.values(1).len(), 3);
    }

    #[test]
    fn quantile_grid_uses_observed_values() {
        let s = Arc::new(schema());
        let rows: Vec<Instance> = (0..11)
            .map(|i| Instance::new(i.to_string(), vec![Value::Number((2 * i) as f64), Value::Category(0)]))
            .collect();
        let labels = (0..11).map(|i| i % 2 == 0).collect();
        let ds = Dataset::new(s, rows, labels).unwrap();
        let g = ProposalGrid::from_dataset(&ds, 3);
        assert_eq!(g.values(0), &[Value::Number(0.0), Value::Number(10.0), Value::Number(20.0)]);
    }
}
