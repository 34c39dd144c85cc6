//! Named inequality checks with their slacks.

use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub name: String,
    /// Left-hand side minus right-hand side; the check holds when `slack >= -tol`.
    pub slack: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConditionReport {
    pub conditions: Vec<Condition>,
}

impl ConditionReport {
    pub(crate) fn check(&mut self, name: impl Into<String>, slack: f64, tol: f64) {
        self.conditions.push(Condition {
            name: name.into(),
            slack,
            holds: slack >= -tol,
        });
    }

    pub fn is_ok(&self) -> bool {
        self.conditions.iter().all(|c| c.holds)
    }

    pub fn violations(&self) -> Vec<&Condition> {
        self.conditions.iter().filter(|c| !c.holds).collect()
    }

    pub fn merge(&mut self, other: ConditionReport) {
        self.conditions.extend(other.conditions);
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.conditions {
            let tag = if c.holds { "ok  " } else { "FAIL" };
            writeln!(f, "{tag} {} (slack {:e})", c.name, c.slack)?;
        }
        Ok(())
    }
}
