//! Structured key/value text reports for the batch interface.  Output
//! is deterministic: lines appear in insertion order.

use std::fmt;

#[derive(Clone, Debug, Default)]
pub struct Report {
    lines: Vec<Line>,
}

#[derive(Clone, Debug)]
enum Line {
    Pair(String, String),
    Blank,
}

impl Report {
    pub fn new() -> Report {
        Report::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl fmt::Display) -> &mut Self {
        self.lines.push(Line::Pair(key.into(), value.to_string()));
        self
    }

    pub fn blank(&mut self) -> &mut Self {
        self.lines.push(Line::Blank);
        self
    }

    /// Append a pre-rendered block, splitting it into plain lines.
    pub fn block(&mut self, text: &str) -> &mut Self {
        for l in text.lines() {
            match l.split_once(':') {
                Some((k, v)) => self.push(k.trim(), v.trim()),
                None => self.push("note", l.trim()),
            };
        }
        self
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in &self.lines {
            match line {
                Line::Pair(k, v) => writeln!(f, "{k}: {v}")?,
                Line::Blank => writeln!(f)?,
            }
        }
        Ok(())
    }
}
