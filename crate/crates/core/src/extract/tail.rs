//! Detects statistical content in tail entities: quantity cue phrases and
//! numeric spans (numbers, percentages, ranges, magnitudes with units).

use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;

/// Cue phrases that mark a tail as statistical even without a number.
pub const CUE_LEXICON: [&str; 9] =
    ["up to", "approximately", "on average", "can save", "can reduce", "over", "less than", "nearly", "about"];

static CUES: LazyLock<Regex> = LazyLock::new(|| {
    let alts: Vec<String> = CUE_LEXICON.iter().map(|c| regex::escape(c).replace(' ', r"\s+")).collect();
    Regex::new(&format!(r"(?i)\b(?:{})\b", alts.join("|"))).unwrap()
});

const NUM: &str = r"\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d+)?";
const SCALES: &str = "thousand|million|billion|trillion";
const UNITS: &str = "gwh|mwh|kwh|twh|gw|mw|kw|tw|metric\\s+tons?|tonnes?|tons?|hectares?|acres?\
    |square\\s+kilometers?|km2|kilometers?|kilometres?|km|miles?|gallons?|liters?|litres?\
    |cubic\\s+meters?|kg|kilograms?|grams?|meters?|metres?|degrees?|species|people|households";

static NUMERIC: LazyLock<Regex> = LazyLock::new(|| {
    let pattern = format!(
        r"(?xi)
        \b(?P<a>{NUM})
        (?P<apct>\s?%)?
        (?:\s*(?:-|–|\bto\b)\s*(?P<b>{NUM}))?
        (?:
            (?P<pct>\s?%|\s?\bper\s?cent\b|\s?\bpercent\b)
          | (?:\s+(?P<scale>{SCALES}))?\s*\b(?P<unit>{UNITS})\b
          | \s+(?P<scaleonly>{SCALES})\b
        )?"
    );
    Regex::new(&pattern).unwrap()
});

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "unit", rename_all = "snake_case")]
pub enum UnitTag {
    /// Bare number with no unit.
    Plain,
    Percent,
    /// Physical or count unit as written, lowercased.
    Unit(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumericSpan {
    pub text: String,
    /// First (or only) value, multiplied out by any scale word.
    pub magnitude: f64,
    /// Upper end for ranges such as `20-40%` or `20% to 28%`.
    pub upper: Option<f64>,
    pub unit: UnitTag,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailClassification {
    pub is_statistical: bool,
    pub cue_matches: Vec<String>,
    pub numeric_spans: Vec<NumericSpan>,
}

fn parse_num(s: &str) -> f64 {
    s.replace(',', "").parse().unwrap_or(f64::NAN)
}

fn scale_factor(word: &str) -> f64 {
    match word.to_ascii_lowercase().as_str() {
        "thousand" => 1e3,
        "million" => 1e6,
        "billion" => 1e9,
        "trillion" => 1e12,
        _ => 1.0,
    }
}

pub fn classify_tail(tail: &str) -> TailClassification {
    let cue_matches: Vec<String> = CUES
        .find_iter(tail)
        .map(|m| m.as_str().split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase())
        .collect();

    let numeric_spans: Vec<NumericSpan> = NUMERIC
        .captures_iter(tail)
        .map(|c| {
            let scale = c.name("scale").or_else(|| c.name("scaleonly")).map_or(1.0, |m| scale_factor(m.as_str()));
            let unit = if c.name("pct").is_some() || c.name("apct").is_some() {
                UnitTag::Percent
            } else if let Some(u) = c.name("unit") {
                UnitTag::Unit(u.as_str().split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase())
            } else {
                UnitTag::Plain
            };
            NumericSpan {
                text: c[0].trim().to_owned(),
                magnitude: parse_num(&c["a"]) * scale,
                upper: c.name("b").map(|b| parse_num(b.as_str()) * scale),
                unit,
            }
        })
        .collect();

    TailClassification {
        is_statistical: !cue_matches.is_empty() || !numeric_spans.is_empty(),
        cue_matches,
        numeric_spans,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spans(t: &str) -> Vec<String> {
        classify_tail(t).numeric_spans.into_iter().map(|s| s.text).collect()
    }

    #[test]
    fn landfill_percentage() {
        let c = classify_tail("Reduced landfill waste by 30%");
        assert!(c.is_statistical);
        assert_eq!(spans("Reduced landfill waste by 30%"), ["30%"]);
        assert_eq!(c.numeric_spans[0].unit, UnitTag::Percent);
        assert_eq!(c.numeric_spans[0].magnitude, 30.0);
    }

    #[test]
    fn plain_phrase_is_not_statistical() {
        let c = classify_tail("Dependence on fossil fuels");
        assert!(!c.is_statistical);
        assert!(c.cue_matches.is_empty() && c.numeric_spans.is_empty());
    }

    #[test]
    fn cue_and_span_together() {
        let c = classify_tail("Over 15% Total Electricity Consumption");
        assert_eq!(c.cue_matches, ["over"]);
        assert_eq!(spans("Over 15% Total Electricity Consumption"), ["15%"]);
    }

    #[test]
    fn ranges() {
        let c = classify_tail("20-40% Water Consumption");
        assert_eq!(c.numeric_spans[0].text, "20-40%");
        assert_eq!(c.numeric_spans[0].upper, Some(40.0));
        let c = classify_tail("20% to 28%");
        assert_eq!(c.numeric_spans.len(), 1);
        assert_eq!(c.numeric_spans[0].text, "20% to 28%");
        assert_eq!((c.numeric_spans[0].magnitude, c.numeric_spans[0].upper), (20.0, Some(28.0)));
        assert_eq!(spans("80-90% Reduction in Shower Water Consumption"), ["80-90%"]);
    }

    #[test]
    fn magnitudes_with_units() {
        let c = classify_tail("420 million hectares of forest lost since 1990");
        assert_eq!(c.numeric_spans[0].text, "420 million hectares");
        assert_eq!(c.numeric_spans[0].magnitude, 420e6);
        assert_eq!(c.numeric_spans[0].unit, UnitTag::Unit("hectares".into()));
        assert_eq!(c.numeric_spans[1].text, "1990");
        let c = classify_tail("63 GW");
        assert_eq!(c.numeric_spans[0].unit, UnitTag::Unit("gw".into()));
        assert_eq!(spans("1,500 miles"), ["1,500 miles"]);
        assert_eq!(classify_tail("1,500 miles").numeric_spans[0].magnitude, 1500.0);
    }

    #[test]
    fn cue_needs_word_boundary() {
        assert!(!classify_tail("Overall carbon footprint").is_statistical);
        assert!(!classify_tail("CO2 emissions").is_statistical);
        assert!(classify_tail("nearly half of households").is_statistical);
        assert_eq!(classify_tail("can   reduce runoff").cue_matches, ["can reduce"]);
    }
}
