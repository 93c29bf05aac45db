//! Answer evaluation: WikiTQ denotation match, TabFact binary match and
//! ROUGE for free-form answers, plus per-run report aggregation.
//!
//! The denotation part mirrors the value semantics of the reference WikiTQ
//! evaluator: strings are normalized (diacritics, quotes, dashes, trailing
//! citations and parentheticals), values are typed as numbers, dates or
//! strings, duplicate values collapse, and a prediction matches when it has
//! as many distinct values as the gold list and covers every gold value.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;

use crate::table::Table;

/// `str.isspace` semantics, which include the ASCII information separators.
fn is_py_space(c: char) -> bool {
    c.is_whitespace() || ('\u{1c}'..='\u{1f}').contains(&c)
}

fn py_strip(s: &str) -> &str {
    s.trim_matches(is_py_space)
}

/// Text normalization applied to every answer value.
pub fn normalize(text: &str) -> String {
    let mut x: String = text
        .nfkd()
        .filter(|c| get_general_category(*c) != GeneralCategory::NonspacingMark)
        .map(|c| match c {
            '\u{2018}' | '\u{2019}' | '\u{b4}' | '`' => '\'',
            '\u{201c}' | '\u{201d}' => '"',
            '\u{2010}' | '\u{2011}' | '\u{2012}' | '\u{2013}' | '\u{2014}' | '\u{2212}' => '-',
            other => other,
        })
        .collect();
    loop {
        let old = x.clone();
        let s = py_strip(&x);
        let s = strip_citations(s);
        let s = py_strip(s);
        let s = strip_parentheticals(s);
        let s = py_strip(s);
        let s = strip_outer_quotes(s);
        x = s.to_string();
        if x == old {
            break;
        }
    }
    if x.ends_with('.') {
        x.pop();
    }
    let mut out = String::with_capacity(x.len());
    let mut in_space = false;
    for c in x.chars() {
        if is_py_space(c) {
            if !in_space {
                out.push(' ');
            }
            in_space = true;
        } else {
            out.push(c);
            in_space = false;
        }
    }
    py_strip(&out.to_lowercase()).to_string()
}

/// Leftmost position from which the rest of `s` splits into units produced
/// by `unit`, which returns the end of the unit starting at a char index.
fn removable_suffix(
    chars: &[(usize, char)],
    len: usize,
    min_start: usize,
    unit: impl Fn(usize) -> Option<usize>,
) -> usize {
    let n = chars.len();
    let mut ok = vec![false; n + 1];
    ok[n] = true;
    for p in (0..n).rev() {
        ok[p] = unit(p).is_some_and(|q| ok[q]);
    }
    (min_start..=n)
        .find(|&p| ok[p])
        .map_or(len, |p| chars.get(p).map_or(len, |(b, _)| *b))
}

/// Trailing `[..]` references (not at the very start unless numeric) and
/// footnote symbols.
fn strip_citations(s: &str) -> &str {
    let chars: Vec<(usize, char)> = s.char_indices().collect();
    let cut = removable_suffix(&chars, s.len(), 0, |p| match chars[p].1 {
        '•' | '♦' | '†' | '‡' | '*' | '#' | '+' => Some(p + 1),
        '[' => {
            let close = (p + 1..chars.len()).find(|&i| chars[i].1 == ']')?;
            let inner = &chars[p + 1..close];
            let numeric = !inner.is_empty() && inner.iter().all(|(_, c)| c.is_numeric_digit());
            (p > 0 || numeric).then_some(close + 1)
        }
        _ => None,
    });
    &s[..cut]
}

/// Trailing ` (..)` groups, never the whole string.
fn strip_parentheticals(s: &str) -> &str {
    let chars: Vec<(usize, char)> = s.char_indices().collect();
    let cut = removable_suffix(&chars, s.len(), 1, |p| {
        if chars[p].1 != ' ' || chars.get(p + 1).map(|c| c.1) != Some('(') {
            return None;
        }
        let close = (p + 2..chars.len()).find(|&i| chars[i].1 == ')')?;
        Some(close + 1)
    });
    &s[..cut]
}

fn strip_outer_quotes(s: &str) -> &str {
    match s.strip_prefix('"').and_then(|r| r.strip_suffix('"')) {
        Some(inner) if !inner.contains('"') => inner,
        _ => s,
    }
}

trait DecimalDigit {
    fn is_numeric_digit(&self) -> bool;
}

impl DecimalDigit for char {
    fn is_numeric_digit(&self) -> bool {
        get_general_category(*self) == GeneralCategory::DecimalNumber
    }
}

/// Digits with single underscores between them.
fn digit_part(s: &str) -> bool {
    !s.is_empty()
        && !s.starts_with('_')
        && !s.ends_with('_')
        && !s.contains("__")
        && s.chars().all(|c| c.is_numeric_digit() || c == '_')
}

/// Value of a decimal digit from any script. Such digits come in runs of
/// ten starting at zero, so the value is the offset within the run.
fn digit_value(c: char) -> u32 {
    let mut offset = 0;
    let mut cp = c as u32;
    while let Some(prev) = cp.checked_sub(1).and_then(char::from_u32) {
        if !prev.is_numeric_digit() {
            break;
        }
        offset += 1;
        cp -= 1;
    }
    offset % 10
}

/// Drops underscores and rewrites every decimal digit in ASCII.
fn ascii_number(t: &str) -> String {
    t.chars()
        .filter(|&c| c != '_')
        .map(|c| {
            if c.is_ascii() || !c.is_numeric_digit() {
                c
            } else {
                char::from_digit(digit_value(c), 10).unwrap_or(c)
            }
        })
        .collect()
}

fn py_int(text: &str) -> Option<i64> {
    let t = py_strip(text);
    let body = t.strip_prefix(['+', '-']).unwrap_or(t);
    if !digit_part(body) {
        return None;
    }
    ascii_number(t).parse().ok()
}

fn py_float(text: &str) -> Option<f64> {
    let t = py_strip(text);
    let body = t.strip_prefix(['+', '-']).unwrap_or(t);
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], Some(&body[i + 1..])),
        None => (body, None),
    };
    let (int, frac) = match mantissa.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (mantissa, None),
    };
    let valid_mantissa = match frac {
        Some(f) => {
            (int.is_empty() || digit_part(int)) && (f.is_empty() || digit_part(f)) && !(int.is_empty() && f.is_empty())
        }
        None => digit_part(int),
    };
    let valid_exp = exponent.is_none_or(|e| digit_part(e.strip_prefix(['+', '-']).unwrap_or(e)));
    if !valid_mantissa || !valid_exp {
        return None;
    }
    ascii_number(t).parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_number(text: &str) -> Option<f64> {
    py_int(text).map(|i| i as f64).or_else(|| py_float(text))
}

type Ymd = (i64, i64, i64);

fn parse_date(text: &str) -> Option<Ymd> {
    let lowered = text.to_lowercase();
    let parts: Vec<&str> = lowered.split('-').collect();
    let [y, m, d] = parts.as_slice() else {
        return None;
    };
    let year = if *y == "xx" || *y == "xxxx" { -1 } else { py_int(y)? };
    let month = if *m == "xx" { -1 } else { py_int(m)? };
    let day = if *d == "xx" { -1 } else { py_int(d)? };
    let valid = !(year == -1 && month == -1 && day == -1)
        && (month == -1 || (1..=12).contains(&month))
        && (day == -1 || (1..=31).contains(&day));
    valid.then_some((year, month, day))
}

const MONTHS: [&str; 12] = [
    "january",
    "february",
    "march",
    "april",
    "may",
    "june",
    "july",
    "august",
    "september",
    "october",
    "november",
    "december",
];

/// Stand-in for the tagger output the reference evaluator consults: grouped
/// numbers lose their separators and `Month D, YYYY` becomes ISO. Anything
/// else is returned unchanged.
pub fn canonicalize(value: &str) -> String {
    let t = py_strip(value);
    if is_grouped_number(t) {
        return t.replace(',', "");
    }
    if let Some(iso) = month_day_year(t) {
        return iso;
    }
    value.to_string()
}

fn is_grouped_number(t: &str) -> bool {
    let body = t.strip_prefix(['+', '-']).unwrap_or(t);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    if frac.is_some_and(|f| f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit())) {
        return false;
    }
    let mut groups = int.split(',');
    let head = groups.next().unwrap_or("");
    let mut count = 0;
    let rest_ok = groups.all(|g| {
        count += 1;
        g.len() == 3 && g.bytes().all(|b| b.is_ascii_digit())
    });
    (1..=3).contains(&head.len()) && head.bytes().all(|b| b.is_ascii_digit()) && rest_ok && count > 0
}

fn month_day_year(t: &str) -> Option<String> {
    let letters = t.bytes().take_while(u8::is_ascii_alphabetic).count();
    let month = MONTHS.iter().position(|m| m.eq_ignore_ascii_case(&t[..letters]))? + 1;
    let rest = &t[letters..];
    let rest = rest.strip_prefix('.').unwrap_or(rest);
    let trimmed = rest.trim_start_matches(' ');
    if trimmed.len() == rest.len() {
        return None;
    }
    let (day, year) = trimmed.split_once(',')?;
    let year = year.trim_start_matches(' ');
    let digits = |s: &str, lens: &[usize]| lens.contains(&s.len()) && s.bytes().all(|b| b.is_ascii_digit());
    if !digits(day, &[1, 2]) || !digits(year, &[4]) {
        return None;
    }
    let day: u32 = day.parse().ok()?;
    (1..=31).contains(&day).then(|| format!("{year}-{month:02}-{day:02}"))
}

/// A typed answer value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number { amount: f64, normalized: String },
    Date { ymd: Ymd, normalized: String },
    Text { normalized: String },
}

impl Value {
    /// Types `original` by parsing `canonical`, and normalizes `original`.
    pub fn parse(original: &str, canonical: &str) -> Value {
        let normalized = normalize(original);
        if let Some(amount) = parse_number(canonical) {
            return Value::Number { amount, normalized };
        }
        if let Some(ymd) = parse_date(canonical) {
            return match ymd {
                (year, -1, -1) => Value::Number {
                    amount: year as f64,
                    normalized,
                },
                _ => Value::Date { ymd, normalized },
            };
        }
        Value::Text { normalized }
    }

    pub fn normalized(&self) -> &str {
        match self {
            Value::Number { normalized, .. } | Value::Date { normalized, .. } | Value::Text { normalized } => {
                normalized
            }
        }
    }

    /// Whether a gold value `self` is matched by a predicted value.
    pub fn matches(&self, other: &Value) -> bool {
        if self.normalized() == other.normalized() {
            return true;
        }
        match (self, other) {
            (Value::Number { amount: a, .. }, Value::Number { amount: b, .. }) => (a - b).abs() < 1e-6,
            (Value::Date { ymd: a, .. }, Value::Date { ymd: b, .. }) => a == b,
            _ => false,
        }
    }

    /// Identity used when collapsing duplicates.
    fn same(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Number { amount: a, .. }, Value::Number { amount: b, .. }) => a == b,
            (Value::Date { ymd: a, .. }, Value::Date { ymd: b, .. }) => a == b,
            (Value::Text { normalized: a }, Value::Text { normalized: b }) => a == b,
            _ => false,
        }
    }
}

fn value_set<'a>(raw: impl IntoIterator<Item = &'a str>) -> Vec<Value> {
    let mut out: Vec<Value> = Vec::new();
    for r in raw {
        let v = Value::parse(r, &canonicalize(r));
        if !out.iter().any(|seen| seen.same(&v)) {
            out.push(v);
        }
    }
    out
}

/// Set-based comparison. `pred` holds `|`-separated values.
pub fn denotation_match<S: AsRef<str>>(pred: &str, gold: &[S]) -> bool {
    let predicted = value_set(pred.split('|'));
    let target = value_set(gold.iter().map(AsRef::as_ref));
    predicted.len() == target.len() && target.iter().all(|t| predicted.iter().any(|p| t.matches(p)))
}

fn to_label(s: &str) -> Option<bool> {
    match s.trim().to_lowercase().as_str() {
        "yes" | "true" | "1" | "entailed" => Some(true),
        "no" | "false" | "0" | "refuted" => Some(false),
        _ => None,
    }
}

/// Both sides mapped to yes/no; an unmappable side never matches.
pub fn binary_match(pred: &str, gold: &str) -> bool {
    matches!((to_label(pred), to_label(gold)), (Some(a), Some(b)) if a == b)
}

/// Lowercased runs of ASCII letters and digits.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_ascii_lowercase() || c.is_ascii_digit()))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn f1(overlap: usize, pred_len: usize, gold_len: usize) -> f64 {
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / pred_len as f64;
    let r = overlap as f64 / gold_len as f64;
    2.0 * p * r / (p + r)
}

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut counts = BTreeMap::new();
    if n > 0 && tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// ROUGE-N F-measure with clipped n-gram overlap.
pub fn rouge_n(pred: &str, gold: &str, n: usize) -> f64 {
    let (p, g) = (tokenize(pred), tokenize(gold));
    let (pc, gc) = (ngram_counts(&p, n), ngram_counts(&g, n));
    let overlap = pc.iter().map(|(k, c)| gc.get(k).map_or(0, |g| (*c).min(*g))).sum();
    f1(overlap, pc.values().sum(), gc.values().sum())
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// ROUGE-L F-measure over the token-level longest common subsequence.
pub fn rouge_l(pred: &str, gold: &str) -> f64 {
    let (p, g) = (tokenize(pred), tokenize(gold));
    f1(lcs_len(&p, &g), p.len(), g.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    WikiTq,
    TabFact,
    FeTaQa,
}

impl core::str::FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wikitq" => Ok(DatasetKind::WikiTq),
            "tabfact" => Ok(DatasetKind::TabFact),
            "fetaqa" => Ok(DatasetKind::FeTaQa),
            _ => Err(format!(
                "unknown dataset kind {s:?} (expected wikitq, tabfact or fetaqa)"
            )),
        }
    }
}

impl core::fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            DatasetKind::WikiTq => "wikitq",
            DatasetKind::TabFact => "tabfact",
            DatasetKind::FeTaQa => "fetaqa",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gold {
    Answers(Vec<String>),
    Sentence(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaInstance {
    pub id: String,
    pub table: Table,
    pub question: String,
    pub gold: Gold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScores {
    pub rouge_1: f64,
    pub rouge_2: f64,
    pub rouge_l: f64,
}

impl RougeScores {
    pub fn score(pred: &str, gold: &str) -> RougeScores {
        RougeScores {
            rouge_1: rouge_n(pred, gold, 1),
            rouge_2: rouge_n(pred, gold, 2),
            rouge_l: rouge_l(pred, gold),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub id: String,
    pub predicted: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rouge: Option<RougeScores>,
    /// 0 when no answer was produced.
    pub iterations_used: usize,
    pub llm_calls: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Scores one prediction. A missing prediction is incorrect, or scores zero
/// ROUGE.
pub fn score_instance(
    kind: DatasetKind,
    instance: &QaInstance,
    predicted: Option<&str>,
) -> (Option<bool>, Option<RougeScores>) {
    let pred = predicted.unwrap_or("");
    match (&instance.gold, kind) {
        (Gold::Sentence(gold), _) => (None, Some(rouge_or_zero(predicted, gold))),
        (Gold::Answers(gold), DatasetKind::FeTaQa) => (None, Some(rouge_or_zero(predicted, &gold.join(" ")))),
        (Gold::Answers(gold), DatasetKind::TabFact) => {
            let ok = predicted.is_some() && gold.first().is_some_and(|g| binary_match(pred, g));
            (Some(ok), None)
        }
        (Gold::Answers(gold), DatasetKind::WikiTq) => (Some(predicted.is_some() && denotation_match(pred, gold)), None),
    }
}

fn rouge_or_zero(predicted: Option<&str>, gold: &str) -> RougeScores {
    match predicted {
        Some(p) => RougeScores::score(p, gold),
        None => RougeScores {
            rouge_1: 0.0,
            rouge_2: 0.0,
            rouge_l: 0.0,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: DatasetKind,
    pub total: usize,
    pub correct: usize,
    /// Absent for free-form datasets.
    pub accuracy: Option<f64>,
    pub rouge_1: Option<f64>,
    pub rouge_2: Option<f64>,
    pub rouge_l: Option<f64>,
    /// Instances per `iterations_used` value.
    pub iteration_histogram: BTreeMap<usize, usize>,
    pub per_instance: Vec<InstanceResult>,
}

impl EvalReport {
    pub fn aggregate(kind: DatasetKind, per_instance: Vec<InstanceResult>) -> EvalReport {
        let total = per_instance.len();
        let correct = per_instance.iter().filter(|r| r.correct == Some(true)).count();
        let mut histogram = BTreeMap::new();
        for r in &per_instance {
            *histogram.entry(r.iterations_used).or_insert(0) += 1;
        }
        let mean = |f: fn(&RougeScores) -> f64| {
            let scores: Vec<f64> = per_instance.iter().filter_map(|r| r.rouge.as_ref().map(f)).collect();
            (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64)
        };
        let (rouge_1, rouge_2, rouge_l) = (mean(|s| s.rouge_1), mean(|s| s.rouge_2), mean(|s| s.rouge_l));
        let accuracy = (kind != DatasetKind::FeTaQa && total > 0).then(|| correct as f64 / total as f64);
        EvalReport {
            kind,
            total,
            correct,
            accuracy,
            rouge_1,
            rouge_2,
            rouge_l,
            iteration_histogram: histogram,
            per_instance,
        }
    }
}
