//! Desk-scale hiring fixtures: a six-feature applicant schema, a hand-built
//! screening model with several independent routes to an interview, and the
//! applicant "Sally" who is rejected by it.

use std::sync::Arc;

use crate::forest::{Forest, Node, Tree};
use crate::tabular::{Feature, Instance, LabelSpec, Schema, Value};

pub const HIRING_MODEL: &str = "hiring-screen";

/// MBA, Python, German, Experience (years), Age, Gender. With
/// `age_actionable` the Age feature is left mutable, which lets the search
/// surface age-based explanations (a bias demo); otherwise it is immutable.
pub fn hiring_schema(age_actionable: bool) -> Schema {
    let age = Feature::numeric("Age", 18.0, 70.0).integer().with_themes(&["demographics"]);
    let age = if age_actionable { age } else { age.immutable() };
    Schema::new(
        "hiring",
        vec![
            Feature::binary("MBA", ["no", "yes"]).valuable().with_themes(&["business schools", "education"]),
            Feature::binary("Python", ["no", "yes"]).with_themes(&["programming languages", "education"]),
            Feature::binary("German", ["no", "yes"]).with_themes(&["languages", "education"]),
            Feature::numeric("Experience", 0.0, 20.0).integer().with_themes(&["careers"]),
            age,
            Feature::categorical("Gender", &["female", "male"]).immutable().with_themes(&["demographics"]),
        ],
        LabelSpec {
            column: "Interview".into(),
            positive: "yes".into(),
            negative: "no".into(),
        },
    )
    .expect("fixture schema is valid")
}

/// Invites iff MBA, or Python, or Age >= 30, or Experience >= 5, or
/// (German and Experience >= 3). Single hand-built tree over the hiring
/// encoding (columns: MBA 0, Python 1, German 2, Experience 3, Age 4).
pub fn hiring_model(schema: Arc<Schema>) -> Forest {
    // The accept leaf (8) is shared by every route.
    let tree = Tree::from_nodes(vec![
        Node::Split { column: 0, threshold: 0.5, left: 1, right: 8 },
        Node::Split { column: 1, threshold: 0.5, left: 2, right: 8 },
        Node::Split { column: 4, threshold: 29.5, left: 3, right: 8 },
        Node::Split { column: 3, threshold: 2.5, left: 4, right: 5 },
        Node::Leaf { fraction: 0.0, count: 1 },
        Node::Split { column: 3, threshold: 4.5, left: 6, right: 8 },
        Node::Split { column: 2, threshold: 0.5, left: 7, right: 8 },
        Node::Leaf { fraction: 0.0, count: 1 },
        Node::Leaf { fraction: 1.0, count: 1 },
    ])
    .expect("fixture tree is valid");
    Forest::from_trees(schema, vec![tree]).expect("fixture forest is valid")
}

/// Rejected applicant: no MBA, no Python, no German, 2 years experience, 27.
pub fn sally() -> Instance {
    Instance::new(
        "sally",
        vec![
            Value::Category(0),
            Value::Category(0),
            Value::Category(0),
            Value::Number(2.0),
            Value::Number(27.0),
            Value::Category(0),
        ],
    )
}
