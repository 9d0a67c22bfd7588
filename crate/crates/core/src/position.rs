use std::fmt;
use std::str::FromStr;

/// A finite path from the root: 0 steps into an abstraction body, 1..n select arguments.
///
/// The derived order is leftmost-outermost: a prefix sorts before its extensions,
/// and otherwise the first differing step decides.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Position(pub Vec<usize>);

impl Position {
    pub fn root() -> Self {
        Position(Vec::new())
    }

    pub fn from_steps(steps: &[usize]) -> Self {
        Position(steps.to_vec())
    }

    pub fn steps(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        v.push(i);
        Position(v)
    }

    pub fn concat(&self, other: &Position) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Position(v)
    }

    /// `self ≤ other` in the prefix order.
    pub fn is_prefix_of(&self, other: &Position) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn is_strict_prefix_of(&self, other: &Position) -> bool {
        self.0.len() < other.0.len() && self.is_prefix_of(other)
    }

    pub fn parallel(&self, other: &Position) -> bool {
        !self.is_prefix_of(other) && !other.is_prefix_of(self)
    }

    /// The suffix `q` with `self = prefix·q`.
    pub fn strip_prefix(&self, prefix: &Position) -> Option<Position> {
        self.0.strip_prefix(prefix.0.as_slice()).map(|s| Position(s.to_vec()))
    }

    pub fn parent(&self) -> Option<Position> {
        if self.0.is_empty() {
            None
        } else {
            Some(Position(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    /// All prefixes, shortest first, including the root and `self`.
    pub fn prefixes(&self) -> Vec<Position> {
        (0..=self.0.len()).map(|k| Position(self.0[..k].to_vec())).collect()
    }

    /// Digits run together (`101`), `@` for the root; dotted if a step exceeds 9.
    pub fn compact(&self) -> String {
        if self.0.is_empty() {
            return "@".to_string();
        }
        if self.0.iter().all(|&s| s < 10) {
            self.0.iter().map(|s| s.to_string()).collect()
        } else {
            self.to_string()
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "@");
        }
        let parts: Vec<String> = self.0.iter().map(|s| s.to_string()).collect();
        write!(f, "{}", parts.join("."))
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("malformed position `{0}`")]
pub struct PositionParseError(pub String);

impl FromStr for Position {
    type Err = PositionParseError;

    /// Accepts `@`, `@1.0.1`, `1.0.1`, and the compact single-digit form `101`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s.trim();
        let body = body.strip_prefix('@').unwrap_or(body);
        if body.is_empty() {
            return Ok(Position::root());
        }
        let err = || PositionParseError(s.to_string());
        if body.contains('.') {
            body.split('.')
                .map(|p| p.parse::<usize>().map_err(|_| err()))
                .collect::<Result<Vec<_>, _>>()
                .map(Position)
        } else {
            body.chars()
                .map(|c| c.to_digit(10).map(|d| d as usize).ok_or_else(err))
                .collect::<Result<Vec<_>, _>>()
                .map(Position)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_and_parse() {
        let p = Position::from_steps(&[1, 0, 1]);
        assert_eq!(p.to_string(), "1.0.1");
        assert_eq!(p.compact(), "101");
        assert_eq!(Position::root().to_string(), "@");
        assert_eq!("@1.0.1".parse::<Position>().unwrap(), p);
        assert_eq!("101".parse::<Position>().unwrap(), p);
        assert_eq!("@".parse::<Position>().unwrap(), Position::root());
        assert!("1.x".parse::<Position>().is_err());
    }

    #[test]
    fn prefix_relations() {
        let p = Position::from_steps(&[1]);
        let q = Position::from_steps(&[1, 2]);
        let r = Position::from_steps(&[2]);
        assert!(p.is_strict_prefix_of(&q));
        assert!(p.parallel(&r));
        assert_eq!(q.strip_prefix(&p), Some(Position::from_steps(&[2])));
        assert!(p < q && q < r);
    }
}
