//! Phonemes as articulatory feature bundles, per-accent inventories, the
//! cross-accent token map and the feature-weighted phoneme distance.
//!
//! Symbols are opaque X-SAMPA-style strings. Every feature comes from the
//! inventory file, never from the spelling of the symbol.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Frontend tokens that mark word or syllable boundaries rather than phonemes.
pub const BOUNDARY_SYMBOLS: &[&str] = &[".", "#", "|", "||", "%", "-"];

pub fn is_boundary(symbol: &str) -> bool {
    BOUNDARY_SYMBOLS.contains(&symbol)
}

#[derive(Debug, Error, PartialEq)]
pub enum InventoryError {
    #[error("inventory parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("phoneme #{index} ({symbol:?}): field `{field}`: {message}")]
    Field {
        index: usize,
        symbol: String,
        field: &'static str,
        message: String,
    },
    #[error("phoneme #{index} ({symbol:?}): unknown value {value:?} for feature `{field}`")]
    UnknownValue {
        index: usize,
        symbol: String,
        field: &'static str,
        value: String,
    },
    #[error("duplicate phoneme symbol {0:?}")]
    DuplicateSymbol(String),
    #[error("inventory for accent {0:?} has no phonemes")]
    Empty(String),
    #[error("accent tag {0:?} appears in more than one inventory")]
    DuplicateAccent(String),
    #[error("no inventories supplied")]
    NoInventories,
}

#[derive(Debug, Error, PartialEq)]
pub enum SequenceError {
    #[error("symbol {symbol:?} at position {position} is not in the {accent} inventory")]
    UnknownSymbol {
        accent: String,
        symbol: String,
        position: usize,
    },
    #[error("phoneme sequence is empty")]
    Empty,
}

#[derive(Debug, Error, PartialEq)]
pub enum CostConfigError {
    #[error("{group} weights sum to {sum}, expected 1")]
    WeightSum { group: &'static str, sum: f64 },
    #[error("weight `{0}` is negative or not finite")]
    BadWeight(&'static str),
    #[error("cross_kind_cost must lie in (0, 1], got {0}")]
    CrossKind(f64),
    #[error("indel_cost must be positive, got {0}")]
    Indel(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhonemeKind {
    Vowel,
    Consonant,
}

macro_rules! ordinal_feature {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn ordinal(self) -> u8 {
                self as u8
            }

            /// Largest ordinal minus smallest, used to normalize differences.
            pub fn range() -> f64 {
                (Self::ALL.len() - 1) as f64
            }

            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }

            pub fn from_label(label: &str) -> Option<Self> {
                match label {
                    $($label => Some($name::$variant),)+
                    _ => None,
                }
            }

            pub fn from_ordinal(ordinal: u64) -> Option<Self> {
                Self::ALL.get(ordinal as usize).copied()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }
    };
}

ordinal_feature!(
    /// Place of articulation, front of the mouth to the back.
    Place {
        Bilabial => "bilabial",
        Labiodental => "labiodental",
        Dental => "dental",
        Alveolar => "alveolar",
        Postalveolar => "postalveolar",
        Retroflex => "retroflex",
        Palatal => "palatal",
        Velar => "velar",
        Glottal => "glottal",
    }
);

ordinal_feature!(
    /// Manner of articulation, most to least obstructed.
    Manner {
        Stop => "stop",
        Affricate => "affricate",
        Fricative => "fricative",
        Nasal => "nasal",
        Lateral => "lateral",
        Approximant => "approximant",
        Tap => "tap",
    }
);

ordinal_feature!(
    Height {
        Close => "close",
        CloseMid => "close-mid",
        OpenMid => "open-mid",
        Open => "open",
    }
);

ordinal_feature!(
    Backness {
        Front => "front",
        Central => "central",
        Back => "back",
    }
);

/// Feature bundle for one phoneme.
///
/// Kind-specific features are `None` on the other kind and never enter the
/// distance computation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Phoneme {
    symbol: String,
    kind: PhonemeKind,
    voiced: bool,
    place: Option<Place>,
    manner: Option<Manner>,
    height: Option<Height>,
    backness: Option<Backness>,
    rounded: bool,
    long: bool,
    rhotic: bool,
}

impl Phoneme {
    pub fn consonant(
        symbol: impl Into<String>,
        place: Place,
        manner: Manner,
        voiced: bool,
        rhotic: bool,
    ) -> Self {
        Self {
            symbol: symbol.into(),
            kind: PhonemeKind::Consonant,
            voiced,
            place: Some(place),
            manner: Some(manner),
            height: None,
            backness: None,
            rounded: false,
            long: false,
            rhotic,
        }
    }

    pub fn vowel(
        symbol: impl Into<String>,
        height: Height,
        backness: Backness,
        rounded: bool,
        long: bool,
        rhotic: bool,
    ) -> Self {
        Self {
            symbol: symbol.into(),
            kind: PhonemeKind::Vowel,
            voiced: true,
            place: None,
            manner: None,
            height: Some(height),
            backness: Some(backness),
            rounded,
            long,
            rhotic,
        }
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn kind(&self) -> PhonemeKind {
        self.kind
    }

    pub fn is_vowel(&self) -> bool {
        self.kind == PhonemeKind::Vowel
    }

    pub fn is_consonant(&self) -> bool {
        self.kind == PhonemeKind::Consonant
    }

    pub fn voiced(&self) -> bool {
        self.voiced
    }

    pub fn place(&self) -> Option<Place> {
        self.place
    }

    pub fn manner(&self) -> Option<Manner> {
        self.manner
    }

    pub fn height(&self) -> Option<Height> {
        self.height
    }

    pub fn backness(&self) -> Option<Backness> {
        self.backness
    }

    pub fn rounded(&self) -> bool {
        self.rounded
    }

    pub fn long(&self) -> bool {
        self.long
    }

    pub fn rhotic(&self) -> bool {
        self.rhotic
    }
}

impl fmt::Display for Phoneme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.symbol)
    }
}

/// The phoneme set produced by one accent's frontend.
#[derive(Debug, Clone, PartialEq)]
pub struct PhonemeInventory {
    accent: String,
    phonemes: Vec<Phoneme>,
    by_symbol: HashMap<String, usize>,
}

impl PhonemeInventory {
    pub fn new(accent: impl Into<String>, phonemes: Vec<Phoneme>) -> Result<Self, InventoryError> {
        let accent = accent.into();
        if phonemes.is_empty() {
            return Err(InventoryError::Empty(accent));
        }
        let mut by_symbol = HashMap::with_capacity(phonemes.len());
        for (i, p) in phonemes.iter().enumerate() {
            if by_symbol.insert(p.symbol.clone(), i).is_some() {
                return Err(InventoryError::DuplicateSymbol(p.symbol.clone()));
            }
        }
        Ok(Self {
            accent,
            phonemes,
            by_symbol,
        })
    }

    pub fn accent(&self) -> &str {
        &self.accent
    }

    pub fn phonemes(&self) -> &[Phoneme] {
        &self.phonemes
    }

    pub fn len(&self) -> usize {
        self.phonemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phonemes.is_empty()
    }

    pub fn get(&self, symbol: &str) -> Option<&Phoneme> {
        self.by_symbol.get(symbol).map(|&i| &self.phonemes[i])
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.by_symbol.contains_key(symbol)
    }

    /// Resolves whitespace-separated symbols against this inventory,
    /// dropping boundary markers such as `.` and `#`.
    pub fn parse_sequence(&self, text: &str) -> Result<Vec<Phoneme>, SequenceError> {
        self.resolve(text.split_whitespace())
    }

    pub fn resolve<'a, I>(&self, symbols: I) -> Result<Vec<Phoneme>, SequenceError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut out = Vec::new();
        for (position, symbol) in symbols.into_iter().enumerate() {
            if is_boundary(symbol) {
                continue;
            }
            match self.get(symbol) {
                Some(p) => out.push(p.clone()),
                None => {
                    return Err(SequenceError::UnknownSymbol {
                        accent: self.accent.clone(),
                        symbol: symbol.to_string(),
                        position,
                    })
                }
            }
        }
        if out.is_empty() {
            return Err(SequenceError::Empty);
        }
        Ok(out)
    }

    /// Serializes back to the inventory file format.
    pub fn to_json(&self) -> String {
        let doc = RawInventory {
            accent: self.accent.clone(),
            phonemes: self.phonemes.iter().map(RawPhoneme::from).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("inventory serialization cannot fail")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInventory {
    accent: String,
    phonemes: Vec<RawPhoneme>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RawOrdinal {
    Label(String),
    Ordinal(u64),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhoneme {
    symbol: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    voiced: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    place: Option<RawOrdinal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    manner: Option<RawOrdinal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    height: Option<RawOrdinal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    backness: Option<RawOrdinal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rounded: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    long: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rhotic: Option<bool>,
}

impl From<&Phoneme> for RawPhoneme {
    fn from(p: &Phoneme) -> Self {
        let label = |s: &str| Some(RawOrdinal::Label(s.to_string()));
        match p.kind {
            PhonemeKind::Consonant => RawPhoneme {
                symbol: p.symbol.clone(),
                kind: "consonant".into(),
                voiced: Some(p.voiced),
                place: p.place.and_then(|v| label(v.label())),
                manner: p.manner.and_then(|v| label(v.label())),
                height: None,
                backness: None,
                rounded: None,
                long: None,
                rhotic: Some(p.rhotic),
            },
            PhonemeKind::Vowel => RawPhoneme {
                symbol: p.symbol.clone(),
                kind: "vowel".into(),
                voiced: Some(p.voiced),
                place: None,
                manner: None,
                height: p.height.and_then(|v| label(v.label())),
                backness: p.backness.and_then(|v| label(v.label())),
                rounded: Some(p.rounded),
                long: Some(p.long),
                rhotic: Some(p.rhotic),
            },
        }
    }
}

struct FieldCtx<'a> {
    index: usize,
    symbol: &'a str,
}

impl FieldCtx<'_> {
    fn field(&self, field: &'static str, message: impl Into<String>) -> InventoryError {
        InventoryError::Field {
            index: self.index,
            symbol: self.symbol.to_string(),
            field,
            message: message.into(),
        }
    }

    fn ordinal<T>(
        &self,
        field: &'static str,
        raw: &Option<RawOrdinal>,
        from_label: fn(&str) -> Option<T>,
        from_ordinal: fn(u64) -> Option<T>,
    ) -> Result<T, InventoryError> {
        let unknown = |value: String| InventoryError::UnknownValue {
            index: self.index,
            symbol: self.symbol.to_string(),
            field,
            value,
        };
        match raw {
            None => Err(self.field(field, "required for this phoneme kind")),
            Some(RawOrdinal::Label(s)) => from_label(s).ok_or_else(|| unknown(s.clone())),
            Some(RawOrdinal::Ordinal(n)) => from_ordinal(*n).ok_or_else(|| unknown(n.to_string())),
        }
    }

    fn forbid<T>(&self, field: &'static str, raw: &Option<T>) -> Result<(), InventoryError> {
        if raw.is_some() {
            return Err(self.field(field, "not allowed on this phoneme kind"));
        }
        Ok(())
    }
}

fn convert(index: usize, raw: &RawPhoneme) -> Result<Phoneme, InventoryError> {
    let ctx = FieldCtx {
        index,
        symbol: &raw.symbol,
    };
    if raw.symbol.trim().is_empty() || raw.symbol.chars().any(char::is_whitespace) {
        return Err(ctx.field("symbol", "must be a non-empty token without whitespace"));
    }
    if is_boundary(&raw.symbol) {
        return Err(ctx.field("symbol", "boundary markers cannot be phonemes"));
    }
    match raw.kind.as_str() {
        "consonant" => {
            ctx.forbid("height", &raw.height)?;
            ctx.forbid("backness", &raw.backness)?;
            if raw.rounded == Some(true) {
                return Err(ctx.field("rounded", "not allowed on consonants"));
            }
            if raw.long == Some(true) {
                return Err(ctx.field("long", "not allowed on consonants"));
            }
            let place = ctx.ordinal("place", &raw.place, Place::from_label, Place::from_ordinal)?;
            let manner = ctx.ordinal(
                "manner",
                &raw.manner,
                Manner::from_label,
                Manner::from_ordinal,
            )?;
            let voiced = raw
                .voiced
                .ok_or_else(|| ctx.field("voiced", "required for consonants"))?;
            Ok(Phoneme::consonant(
                raw.symbol.clone(),
                place,
                manner,
                voiced,
                raw.rhotic.unwrap_or(false),
            ))
        }
        "vowel" => {
            ctx.forbid("place", &raw.place)?;
            ctx.forbid("manner", &raw.manner)?;
            if raw.voiced == Some(false) {
                return Err(ctx.field("voiced", "vowels are voiced"));
            }
            let height = ctx.ordinal(
                "height",
                &raw.height,
                Height::from_label,
                Height::from_ordinal,
            )?;
            let backness = ctx.ordinal(
                "backness",
                &raw.backness,
                Backness::from_label,
                Backness::from_ordinal,
            )?;
            Ok(Phoneme::vowel(
                raw.symbol.clone(),
                height,
                backness,
                raw.rounded.unwrap_or(false),
                raw.long.unwrap_or(false),
                raw.rhotic.unwrap_or(false),
            ))
        }
        other => Err(InventoryError::UnknownValue {
            index,
            symbol: raw.symbol.clone(),
            field: "kind",
            value: other.to_string(),
        }),
    }
}

/// Parses an inventory file.
pub fn load_inventory(text: &str) -> Result<PhonemeInventory, InventoryError> {
    let raw: RawInventory = serde_json::from_str(text).map_err(|e| InventoryError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let phonemes = raw
        .phonemes
        .iter()
        .enumerate()
        .map(|(i, p)| convert(i, p))
        .collect::<Result<Vec<_>, _>>()?;
    PhonemeInventory::new(raw.accent, phonemes)
}

const BUILTIN: &[(&str, &str)] = &[
    ("en-GB", include_str!("../data/en-GB.json")),
    ("en-IE", include_str!("../data/en-IE.json")),
    ("en-US", include_str!("../data/en-US.json")),
];

/// Accent tags with an inventory shipped in the crate.
pub fn builtin_accents() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(tag, _)| *tag)
}

pub fn builtin_inventory(accent: &str) -> Option<PhonemeInventory> {
    BUILTIN
        .iter()
        .find(|(tag, _)| *tag == accent)
        .map(|(_, text)| load_inventory(text).expect("bundled inventory is valid"))
}

/// Shared token ids across accents: one id per distinct symbol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnifiedTokenMap {
    symbols: Vec<String>,
    entries: BTreeMap<(String, String), u32>,
}

impl UnifiedTokenMap {
    /// Number of distinct tokens.
    pub fn token_count(&self) -> usize {
        self.symbols.len()
    }

    /// Number of (accent, symbol) keys.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn token(&self, accent: &str, symbol: &str) -> Option<u32> {
        self.entries
            .get(&(accent.to_string(), symbol.to_string()))
            .copied()
    }

    pub fn symbol(&self, token: u32) -> Option<&str> {
        self.symbols.get(token as usize).map(String::as_str)
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, u32)> {
        self.entries
            .iter()
            .map(|((a, s), &t)| (a.as_str(), s.as_str(), t))
    }
}

/// Builds the cross-accent token map; ids follow lexicographic symbol order.
pub fn unify_tokens(inventories: &[PhonemeInventory]) -> Result<UnifiedTokenMap, InventoryError> {
    if inventories.is_empty() {
        return Err(InventoryError::NoInventories);
    }
    let mut accents = BTreeSet::new();
    for inv in inventories {
        if !accents.insert(inv.accent()) {
            return Err(InventoryError::DuplicateAccent(inv.accent().to_string()));
        }
    }
    let symbols: Vec<String> = inventories
        .iter()
        .flat_map(|inv| inv.phonemes().iter().map(|p| p.symbol().to_string()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let ids: HashMap<&str, u32> = symbols
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i as u32))
        .collect();
    let entries = inventories
        .iter()
        .flat_map(|inv| {
            inv.phonemes().iter().map(|p| {
                (
                    (inv.accent().to_string(), p.symbol().to_string()),
                    ids[p.symbol()],
                )
            })
        })
        .collect();
    Ok(UnifiedTokenMap { symbols, entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsonantWeights {
    pub place: f64,
    pub manner: f64,
    pub voiced: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VowelWeights {
    pub height: f64,
    pub backness: f64,
    pub rounded: f64,
    pub long: f64,
    pub rhotic: f64,
}

/// Parameters of the phoneme substitution and insertion costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostConfig {
    pub consonant: ConsonantWeights,
    pub vowel: VowelWeights,
    pub cross_kind_cost: f64,
    pub indel_cost: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            consonant: ConsonantWeights {
                place: 0.35,
                manner: 0.35,
                voiced: 0.30,
            },
            vowel: VowelWeights {
                height: 0.30,
                backness: 0.30,
                rounded: 0.10,
                long: 0.10,
                rhotic: 0.20,
            },
            cross_kind_cost: 1.0,
            indel_cost: 0.7,
        }
    }
}

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

impl CostConfig {
    pub fn validate(&self) -> Result<(), CostConfigError> {
        let c = &self.consonant;
        let v = &self.vowel;
        let named = [
            ("consonant.place", c.place),
            ("consonant.manner", c.manner),
            ("consonant.voiced", c.voiced),
            ("vowel.height", v.height),
            ("vowel.backness", v.backness),
            ("vowel.rounded", v.rounded),
            ("vowel.long", v.long),
            ("vowel.rhotic", v.rhotic),
        ];
        for (name, w) in named {
            if !w.is_finite() || w < 0.0 {
                return Err(CostConfigError::BadWeight(name));
            }
        }
        let sum = c.place + c.manner + c.voiced;
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(CostConfigError::WeightSum {
                group: "consonant",
                sum,
            });
        }
        let sum = v.height + v.backness + v.rounded + v.long + v.rhotic;
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(CostConfigError::WeightSum {
                group: "vowel",
                sum,
            });
        }
        if !(self.cross_kind_cost > 0.0 && self.cross_kind_cost <= 1.0) {
            return Err(CostConfigError::CrossKind(self.cross_kind_cost));
        }
        if !(self.indel_cost > 0.0 && self.indel_cost.is_finite()) {
            return Err(CostConfigError::Indel(self.indel_cost));
        }
        Ok(())
    }
}

fn ordinal_gap(a: u8, b: u8, range: f64) -> f64 {
    (a as f64 - b as f64).abs() / range
}

fn flag_gap(a: bool, b: bool) -> f64 {
    if a == b {
        0.0
    } else {
        1.0
    }
}

/// Weighted feature mismatch between two phonemes, in `[0, 1]` for a valid
/// config. Phonemes of different kinds cost `cross_kind_cost`.
pub fn phoneme_distance(a: &Phoneme, b: &Phoneme, cfg: &CostConfig) -> f64 {
    if a.kind != b.kind {
        return cfg.cross_kind_cost;
    }
    // Sentinel features are None on both sides of a same-kind pair.
    let ord = |x: Option<u8>, y: Option<u8>, range: f64| match (x, y) {
        (Some(x), Some(y)) => ordinal_gap(x, y, range),
        _ => 0.0,
    };
    match a.kind {
        PhonemeKind::Consonant => {
            let w = &cfg.consonant;
            w.place
                * ord(
                    a.place.map(Place::ordinal),
                    b.place.map(Place::ordinal),
                    Place::range(),
                )
                + w.manner
                    * ord(
                        a.manner.map(Manner::ordinal),
                        b.manner.map(Manner::ordinal),
                        Manner::range(),
                    )
                + w.voiced * flag_gap(a.voiced, b.voiced)
        }
        PhonemeKind::Vowel => {
            let w = &cfg.vowel;
            w.height
                * ord(
                    a.height.map(Height::ordinal),
                    b.height.map(Height::ordinal),
                    Height::range(),
                )
                + w.backness
                    * ord(
                        a.backness.map(Backness::ordinal),
                        b.backness.map(Backness::ordinal),
                        Backness::range(),
                    )
                + w.rounded * flag_gap(a.rounded, b.rounded)
                + w.long * flag_gap(a.long, b.long)
                + w.rhotic * flag_gap(a.rhotic, b.rhotic)
        }
    }
}
