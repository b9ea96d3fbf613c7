use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::text::split_camel_case;

macro_rules! relations {
    ($($name:ident => $phrase:literal),+ $(,)?) => {
        /// The closed relation schema. Lookup by name ignores case; display
        /// and serialization always use the canonical spelling.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum RelationKind {
            $($name),+
        }

        impl RelationKind {
            /// Every distinct relation, in first-listed order.
            pub const ALL: &'static [RelationKind] = &[$(RelationKind::$name),+];

            pub fn name(self) -> &'static str {
                match self {
                    $(RelationKind::$name => stringify!($name)),+
                }
            }

            /// Verb phrase used by template verbalization: `<head> <phrase> <tail>.`
            pub fn phrase(self) -> &'static str {
                match self {
                    $(RelationKind::$name => $phrase),+
                }
            }
        }
    };
}

relations! {
    HasStatistic => "has a statistic of",
    HasNumericValue => "has a value of",
    HasUnitOfMeasurement => "is measured in",
    HasContext => "is set in the context of",
    HasSource => "is sourced from",
    HasSubject => "concerns",
    HasAction => "involves",
    HasAverageValue => "has an average value of",
    HasMinValue => "has a minimum value of",
    HasMaxValue => "has a maximum value of",
    HasImpact => "has the impact of",
    HasPercentileValue => "accounts for",
    HasTrend => "shows a trend of",
    HasComparison => "compares as",
    HasCorrelation => "is correlated with",
    Reduces => "reduces",
    Saves => "saves",
    Decreases => "decreases",
    Increases => "increases",
    EfficiencyOf => "reflects the efficiency of",
    PercentageOf => "makes up",
    RatioOfFrequencyOf => "has a frequency ratio relative to",
    RateOf => "has a rate of",
    VolumeOf => "has a volume of",
    EmissionOf => "is emitted by",
    ConsumptionOf => "is consumed by",
    ImpactOf => "has the effect of",
    BenefitOf => "has the benefit of",
    AdvantageOf => "has the advantage of",
    DisadvantageOf => "has the disadvantage of",
    RiskOf => "carries the risk of",
    PreventionOf => "prevents",
    ProtectionOf => "protects",
    PreservationOf => "preserves",
    ConservationOf => "conserves",
    RecoveryOf => "supports the recovery of",
    ManagementOf => "manages",
    RegulationOf => "regulates",
    PolicyOf => "is a policy for",
    InitiativeOf => "is an initiative of",
    StrategyOf => "is a strategy for",
    AdaptationOf => "is an adaptation to",
    MitigationOf => "mitigates",
    HasPolicyTarget => "has a policy target of",
    HasCapacity => "has a capacity of",
}

/// The published relation list, verbatim and in order. It names `HasImpact`
/// twice, so it has one entry more than [`RelationKind::ALL`].
pub const LISTED_RELATIONS: [&str; 46] = [
    "HasStatistic",
    "HasNumericValue",
    "HasUnitOfMeasurement",
    "HasContext",
    "HasSource",
    "HasSubject",
    "HasAction",
    "HasAverageValue",
    "HasMinValue",
    "HasMaxValue",
    "HasImpact",
    "HasPercentileValue",
    "HasTrend",
    "HasComparison",
    "HasImpact",
    "HasCorrelation",
    "Reduces",
    "Saves",
    "Decreases",
    "Increases",
    "EfficiencyOf",
    "PercentageOf",
    "RatioOfFrequencyOf",
    "RateOf",
    "VolumeOf",
    "EmissionOf",
    "ConsumptionOf",
    "ImpactOf",
    "BenefitOf",
    "AdvantageOf",
    "DisadvantageOf",
    "RiskOf",
    "PreventionOf",
    "ProtectionOf",
    "PreservationOf",
    "ConservationOf",
    "RecoveryOf",
    "ManagementOf",
    "RegulationOf",
    "PolicyOf",
    "InitiativeOf",
    "StrategyOf",
    "AdaptationOf",
    "MitigationOf",
    "HasPolicyTarget",
    "HasCapacity",
];

/// One sample triple per listed relation, used to render relation examples
/// into extraction prompts and as the schema fixture.
pub const RELATION_EXAMPLES: [(&str, &str, &str); 46] = [
    ("Carbon Emissions", "HasStatistic", "4.3 metric tons per capita"),
    ("Global electricity generation", "HasNumericValue", "90%"),
    ("Water Conservation", "HasUnitOfMeasurement", "gallons per household per month"),
    ("Climate Change", "HasContext", "global temperatures rising"),
    ("Environmental Report", "HasSource", "IPCC"),
    ("Sustainable Agriculture", "HasSubject", "soil health"),
    ("Climate Change Mitigation Strategies", "HasAction", "Implementing Carbon Pricing"),
    ("Vehicle Emissions Regulations", "HasAverageValue", "100 grams per kilometer"),
    ("Waste Reduction Campaign", "HasMinValue", "30% reduction in waste production"),
    ("Green Building Standards", "HasMaxValue", "LEED Platinum certification"),
    ("Renewable Energy Project", "HasImpact", "reducing carbon footprint"),
    ("Renewable Energy", "HasPercentileValue", "28% of Electricity Generation"),
    ("Climate Action Plan", "HasTrend", "increasing adoption rates"),
    ("Renewable Energy Adoption", "HasComparison", "surpassing fossil fuel usage"),
    ("Electric Vehicle Adoption", "HasImpact", "reducing air pollution"),
    ("Wildlife Corridors", "HasCorrelation", "Biodiversity conservation"),
    ("Sustainable Transportation", "Reduces", "carbon emissions"),
    ("Water Conservation Measures", "Saves", "freshwater resources"),
    ("Plastic Ban Policy", "Decreases", "plastic pollution"),
    ("Renewable Energy Incentives", "Increases", "adoption rates"),
    ("Energy Efficiency of Appliances", "EfficiencyOf", "Energy Star certified products"),
    ("Water Management Facilities", "PercentageOf", "Over 15% Total Electricity Consumption"),
    ("Renewable Energy", "RatioOfFrequencyOf", "Renewable Energy Adoption"),
    ("Fashion industry", "RateOf", "10% of Carbon Emmisions"),
    ("Volume of Water Used in Agriculture", "VolumeOf", "70%"),
    ("CO2 Emissions", "EmissionOf", "transportation sector"),
    ("Energy Consumption", "ConsumptionOf", "residential buildings"),
    ("Biodiversity Conservation Efforts", "ImpactOf", "preserving habitats"),
    ("Renewable Energy Benefits", "BenefitOf", "reducing dependency on fossil fuels"),
    ("Sustainable Agriculture", "AdvantageOf", "improving soil health"),
    ("Renewable Energy Adoption", "DisadvantageOf", "initial high installation costs"),
    ("Climate Change", "RiskOf", "extreme weather events"),
    ("Carbon Capture Technology", "PreventionOf", "CO2 emissions"),
    ("Protected Areas", "ProtectionOf", "endangered species"),
    ("Ecosystem Restoration Projects", "PreservationOf", "natural habitats"),
    ("Waste Management Programs", "ConservationOf", "landfill space"),
    ("Ocean Cleanup Initiatives", "RecoveryOf", "marine ecosystems"),
    ("Forest Management Practices", "ManagementOf", "timber resources"),
    ("Environmental Regulations", "RegulationOf", "industrial emissions"),
    ("Climate Change Policy", "PolicyOf", "reducing carbon emissions"),
    ("Sustainability Initiative", "InitiativeOf", "local government"),
    ("Environmental Strategy", "StrategyOf", "corporate sustainability"),
    ("Climate Adaptation Plan", "AdaptationOf", "changing climate conditions"),
    ("Climate Mitigation Measures", "MitigationOf", "greenhouse gas emissions"),
    ("Wind Energy", "HasCapacity", "63 GW"),
    ("European Union", "HasPolicyTarget", "40% renewable electricity by 2030"),
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown relation {0:?}")]
pub struct UnknownRelation(pub String);

impl RelationKind {
    /// Case-insensitive lookup of a canonical name. Surrounding whitespace is ignored.
    pub fn lookup(name: &str) -> Option<Self> {
        let name = name.trim();
        Self::ALL.iter().copied().find(|r| r.name().eq_ignore_ascii_case(name))
    }

    /// Lowercase words of the camel-case name: `HasNumericValue` → `has numeric value`.
    pub fn words(self) -> Vec<String> {
        split_camel_case(self.name())
    }

    /// The [`words`](Self::words) joined by spaces, computed once per relation.
    pub fn spoken(self) -> &'static str {
        static SPOKEN: LazyLock<Vec<String>> =
            LazyLock::new(|| RelationKind::ALL.iter().map(|r| r.words().join(" ")).collect());
        let i = Self::ALL.iter().position(|r| *r == self).expect("relation listed in ALL");
        &SPOKEN[i]
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RelationKind {
    type Err = UnknownRelation;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::lookup(s).ok_or_else(|| UnknownRelation(s.to_owned()))
    }
}

impl Serialize for RelationKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for RelationKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn listed_names_resolve_and_cover_the_schema() {
        let resolved: HashSet<_> = LISTED_RELATIONS.iter().map(|n| RelationKind::lookup(n).unwrap()).collect();
        assert_eq!(resolved.len(), RelationKind::ALL.len());
        assert_eq!(RelationKind::ALL.len(), 45);
        let dupes = LISTED_RELATIONS.iter().filter(|n| **n == "HasImpact").count();
        assert_eq!(dupes, 2);
    }

    #[test]
    fn canonical_spelling_roundtrips() {
        for r in RelationKind::ALL {
            assert_eq!(RelationKind::lookup(r.name()), Some(*r));
            assert_eq!(RelationKind::lookup(&r.name().to_uppercase()), Some(*r));
            assert_eq!(r.to_string(), r.name());
        }
        assert_eq!("hascapacity".parse::<RelationKind>(), Ok(RelationKind::HasCapacity));
        assert!("HasMagic".parse::<RelationKind>().is_err());
    }

    #[test]
    fn serializes_canonical_casing() {
        let r: RelationKind = serde_json::from_str("\"hasnumericvalue\"").unwrap();
        assert_eq!(serde_json::to_string(&r).unwrap(), "\"HasNumericValue\"");
    }

    #[test]
    fn examples_use_listed_relations() {
        for (i, (_, rel, _)) in RELATION_EXAMPLES.iter().enumerate() {
            assert!(RelationKind::lookup(rel).is_some(), "row {i}");
        }
    }
}
