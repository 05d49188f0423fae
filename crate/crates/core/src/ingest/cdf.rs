//! IEEE Common Data Format (1973 exchange format) reader.
//!
//! Only what the swing model needs is read: bus number, type, load and
//! generation MW from the bus cards, and endpoints plus series impedance from
//! the branch cards. Fields are sliced by column, never split on whitespace,
//! so blank fields parse.
//!
//! Bus card columns (1-based, inclusive):
//!   1-4 number, 6-17 name, 25-26 type, 41-49 load MW, 59-67 generation MW.
//! Branch card columns:
//!   1-4 tap bus, 6-9 Z bus, 20-29 R, 30-40 X.
//! Title card: 32-37 MVA base.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dynamics::SimConfig;
use crate::error::{GridError, Result};
use crate::grid::{GridTopology, Line, LineKey, MachineParams};

use super::GridCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Susceptance {
    /// `1/x`, the lossless series susceptance.
    Reactance,
    /// `x/(r² + x²)`, the imaginary part of the series admittance.
    SeriesAdmittance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CdfBalance {
    /// Add the negated net injection to the swing bus.
    SlackBus,
    /// Keep the file's injections; the case may be unbalanced.
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfOptions {
    pub susceptance: Susceptance,
    pub balance: CdfBalance,
    pub inertia: f64,
    pub damping: f64,
    pub sim: SimConfig,
}

impl Default for CdfOptions {
    fn default() -> Self {
        CdfOptions {
            susceptance: Susceptance::Reactance,
            balance: CdfBalance::SlackBus,
            inertia: 1.0,
            damping: 0.1,
            sim: SimConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfSummary {
    pub title: String,
    pub base_mva: f64,
    pub bus_count: usize,
    /// Buses of type 2 (generator) or 3 (swing).
    pub machine_count: usize,
    pub branch_records: usize,
    /// Distinct node pairs after merging parallel branches.
    pub line_count: usize,
    pub slack_bus: Option<u32>,
    /// Net injection before balancing, per unit.
    pub raw_imbalance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfCase {
    pub case: GridCase,
    pub summary: CdfSummary,
}

/// Slice of a card by 1-based inclusive columns, tolerant of short lines.
fn columns(card: &str, first: usize, last: usize) -> &str {
    let bytes = card.as_bytes();
    let start = (first - 1).min(bytes.len());
    let end = last.min(bytes.len());
    card.get(start..end).unwrap_or("")
}

fn malformed(line_no: usize, what: &str, card: &str) -> GridError {
    GridError::Syntax {
        line: line_no,
        column: 1,
        message: format!("malformed {what} card: '{}'", card.trim_end()),
    }
}

fn int_field(card: &str, first: usize, last: usize, line_no: usize, what: &str) -> Result<u32> {
    let s = columns(card, first, last).trim();
    s.parse().map_err(|_| GridError::Syntax {
        line: line_no,
        column: first,
        message: format!("{what}: expected an integer in columns {first}-{last}, found '{s}'"),
    })
}

fn real_field(card: &str, first: usize, last: usize, line_no: usize, what: &str) -> Result<f64> {
    let s = columns(card, first, last).trim();
    if s.is_empty() {
        return Ok(0.0);
    }
    s.parse().map_err(|_| GridError::Syntax {
        line: line_no,
        column: first,
        message: format!("{what}: expected a number in columns {first}-{last}, found '{s}'"),
    })
}

fn is_terminator(card: &str) -> bool {
    card.trim_start().starts_with("-999")
}

struct Bus {
    number: u32,
    kind: u32,
    load_mw: f64,
    gen_mw: f64,
}

pub fn parse_ieee_cdf(text: &str, options: &CdfOptions) -> Result<CdfCase> {
    let lines: Vec<&str> = text.lines().collect();
    let title = lines
        .first()
        .ok_or_else(|| GridError::Format("empty CDF file".into()))?;
    let base_mva = real_field(title, 32, 37, 1, "MVA base")?;
    if !(base_mva > 0.0) {
        return Err(malformed(1, "title", title));
    }

    let find_section = |header: &str| -> Result<usize> {
        lines
            .iter()
            .position(|l| l.trim_start().starts_with(header))
            .ok_or_else(|| GridError::Format(format!("missing '{header}' section")))
    };
    let section = |start: usize, name: &str| -> Result<Vec<(usize, &str)>> {
        let mut cards = Vec::new();
        for (i, card) in lines.iter().enumerate().skip(start + 1) {
            if is_terminator(card) {
                return Ok(cards);
            }
            if card.trim().is_empty() {
                continue;
            }
            cards.push((i + 1, *card));
        }
        Err(GridError::Format(format!("{name} section has no -999 terminator")))
    };

    let bus_cards = section(find_section("BUS DATA FOLLOWS")?, "BUS DATA")?;
    let branch_cards = section(find_section("BRANCH DATA FOLLOWS")?, "BRANCH DATA")?;

    let mut buses = Vec::with_capacity(bus_cards.len());
    for &(no, card) in &bus_cards {
        if card.len() < 67 {
            return Err(malformed(no, "bus", card));
        }
        buses.push(Bus {
            number: int_field(card, 1, 4, no, "bus number")?,
            kind: int_field(card, 25, 26, no, "bus type")?,
            load_mw: real_field(card, 41, 49, no, "load MW")?,
            gen_mw: real_field(card, 59, 67, no, "generation MW")?,
        });
    }
    let labels: Vec<u32> = buses.iter().map(|b| b.number).collect();
    let index: BTreeMap<u32, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    if index.len() != labels.len() {
        return Err(GridError::Format("duplicate bus number in BUS DATA".into()));
    }

    let mut merged: BTreeMap<LineKey, f64> = BTreeMap::new();
    for &(no, card) in &branch_cards {
        if card.len() < 40 {
            return Err(malformed(no, "branch", card));
        }
        let from = int_field(card, 1, 4, no, "tap bus")?;
        let to = int_field(card, 6, 9, no, "Z bus")?;
        let r = real_field(card, 20, 29, no, "branch resistance")?;
        let x = real_field(card, 30, 40, no, "branch reactance")?;
        if x == 0.0 {
            return Err(GridError::Syntax {
                line: no,
                column: 30,
                message: format!("branch {from}-{to} has zero reactance"),
            });
        }
        let b = match options.susceptance {
            Susceptance::Reactance => 1.0 / x,
            Susceptance::SeriesAdmittance => x / (r * r + x * x),
        };
        let a = *index.get(&from).ok_or(GridError::UnknownNode(from))?;
        let z = *index.get(&to).ok_or(GridError::UnknownNode(to))?;
        *merged.entry(LineKey::new(a, z)).or_insert(0.0) += b.abs();
    }

    let n = buses.len();
    let mut power: Vec<f64> = buses
        .iter()
        .map(|b| (b.gen_mw - b.load_mw) / base_mva)
        .collect();
    let raw_imbalance: f64 = power.iter().sum();
    let slack = buses.iter().position(|b| b.kind == 3);
    if options.balance == CdfBalance::SlackBus {
        let s = slack.ok_or_else(|| GridError::Format("no swing bus (type 3) to balance against".into()))?;
        power[s] -= raw_imbalance;
    }
    let generators: Vec<usize> = buses
        .iter()
        .enumerate()
        .filter(|(_, b)| b.kind == 2 || b.kind == 3)
        .map(|(i, _)| i)
        .collect();

    let line_count = merged.len();
    let topology = GridTopology::new(
        n,
        merged.into_iter().map(|(k, b)| Line::new(k.lo(), k.hi(), b)),
        generators.iter().copied(),
    )?;
    let summary = CdfSummary {
        title: title.trim().to_string(),
        base_mva,
        bus_count: n,
        machine_count: generators.len(),
        branch_records: branch_cards.len(),
        line_count,
        slack_bus: slack.map(|s| labels[s]),
        raw_imbalance,
    };
    let case = GridCase {
        name: title.get(45..).unwrap_or("").trim().to_string(),
        provenance: format!("IEEE common data format: {}", title.trim()),
        labels,
        topology,
        params: MachineParams::uniform(n, options.inertia, options.damping, power),
        sim: options.sim,
        coupling: None,
    };
    case.validate()?;
    Ok(CdfCase { case, summary })
}
