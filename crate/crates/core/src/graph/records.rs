//! Node attribute records and the calendar that maps dates to periods.

use chrono::{Datelike, Months, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{NodeId, Period};

/// First-tier industry sectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sector {
    InformationTechnology,
    Healthcare,
    B2C,
    B2B,
    FinancialServices,
    MaterialsResources,
    Energy,
}

impl Sector {
    pub const ALL: [Sector; 7] = [
        Sector::InformationTechnology,
        Sector::Healthcare,
        Sector::B2C,
        Sector::B2B,
        Sector::FinancialServices,
        Sector::MaterialsResources,
        Sector::Energy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Sector::InformationTechnology => "IT",
            Sector::Healthcare => "Healthcare",
            Sector::B2C => "B2C",
            Sector::B2B => "B2B",
            Sector::FinancialServices => "FS",
            Sector::MaterialsResources => "M&R",
            Sector::Energy => "Energy",
        }
    }

    pub fn parse(s: &str) -> Option<Sector> {
        Sector::ALL.iter().copied().find(|x| x.name().eq_ignore_ascii_case(s.trim()))
    }
}

/// The 41 second-tier industry labels and their sector.
pub const INDUSTRY_LABELS: [(&str, Sector); 41] = {
    use Sector::*;
    [
        ("Software", InformationTechnology),
        ("IT Services", InformationTechnology),
        ("Communications and Networking", InformationTechnology),
        ("Computer Hardware", InformationTechnology),
        ("Semiconductors", InformationTechnology),
        ("Other Information Technology", InformationTechnology),
        ("Pharmaceuticals and Biotechnology", Healthcare),
        ("Healthcare Devices and Supplies", Healthcare),
        ("Healthcare Services", Healthcare),
        ("Healthcare Technology Systems", Healthcare),
        ("Other Healthcare", Healthcare),
        ("Apparel and Accessories", B2C),
        ("Consumer Durables", B2C),
        ("Consumer Non-Durables", B2C),
        ("Media", B2C),
        ("Restaurants, Hotels and Leisure", B2C),
        ("Retail", B2C),
        ("Transportation", B2C),
        ("Consumer Services", B2C),
        ("Other Consumer Products and Services", B2C),
        ("Aerospace and Defense", B2B),
        ("Commercial Products", B2B),
        ("Commercial Services", B2B),
        ("Commercial Transportation", B2B),
        ("Other Business Products and Services", B2B),
        ("Capital Markets", FinancialServices),
        ("Commercial Banks", FinancialServices),
        ("Insurance", FinancialServices),
        ("Other Financial Services", FinancialServices),
        ("Agriculture", MaterialsResources),
        ("Chemicals and Gases", MaterialsResources),
        ("Construction", MaterialsResources),
        ("Containers and Packaging", MaterialsResources),
        ("Metals, Minerals and Mining", MaterialsResources),
        ("Textiles", MaterialsResources),
        ("Other Materials", MaterialsResources),
        ("Energy Equipment", Energy),
        ("Energy Services", Energy),
        ("Exploration, Production and Refining", Energy),
        ("Utilities", Energy),
        ("Other Energy", Energy),
    ]
};

/// Three-level industry classification. `label` is the second tier.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Industry {
    pub sector: Option<Sector>,
    pub label: String,
    pub detail: String,
}

impl Industry {
    /// Index of the second-tier label in [`INDUSTRY_LABELS`].
    pub fn label_index(&self) -> Option<usize> {
        INDUSTRY_LABELS.iter().position(|(l, _)| l.eq_ignore_ascii_case(self.label.trim()))
    }

    /// Sector, falling back to the one implied by the second-tier label.
    pub fn resolved_sector(&self) -> Option<Sector> {
        self.sector.or_else(|| self.label_index().map(|i| INDUSTRY_LABELS[i].1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DealType {
    Angel,
    Seed,
    Accelerator,
    EarlyStageVc,
    LaterStageVc,
    Corporate,
    Grant,
    Other,
}

impl DealType {
    pub const ALL: [DealType; 8] = [
        DealType::Angel,
        DealType::Seed,
        DealType::Accelerator,
        DealType::EarlyStageVc,
        DealType::LaterStageVc,
        DealType::Corporate,
        DealType::Grant,
        DealType::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DealType::Angel => "Angel",
            DealType::Seed => "Seed",
            DealType::Accelerator => "Accelerator/Incubator",
            DealType::EarlyStageVc => "Early Stage VC",
            DealType::LaterStageVc => "Later Stage VC",
            DealType::Corporate => "Corporate",
            DealType::Grant => "Grant",
            DealType::Other => "Other",
        }
    }

    /// Unknown strings map to [`DealType::Other`].
    pub fn parse(s: &str) -> DealType {
        DealType::ALL
            .iter()
            .copied()
            .find(|d| d.name().eq_ignore_ascii_case(s.trim()))
            .unwrap_or(DealType::Other)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

impl Gender {
    pub const ALL: [Gender; 3] = [Gender::Male, Gender::Female, Gender::Unknown];

    pub fn name(self) -> &'static str {
        match self {
            Gender::Male => "Male",
            Gender::Female => "Female",
            Gender::Unknown => "Unknown",
        }
    }

    pub fn parse(s: &str) -> Gender {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Gender::Male,
            "female" | "f" => Gender::Female,
            _ => Gender::Unknown,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Degree {
    Bachelor,
    Master,
    Doctor,
    Other,
}

impl Degree {
    pub const ALL: [Degree; 4] = [Degree::Bachelor, Degree::Master, Degree::Doctor, Degree::Other];

    pub fn name(self) -> &'static str {
        match self {
            Degree::Bachelor => "Bachelor",
            Degree::Master => "Master",
            Degree::Doctor => "Doctor",
            Degree::Other => "Other",
        }
    }

    pub fn parse(s: &str) -> Degree {
        match s.trim().to_ascii_lowercase().as_str() {
            "bachelor" | "ba" | "bs" | "bsc" => Degree::Bachelor,
            "master" | "ma" | "ms" | "msc" | "mba" => Degree::Master,
            "doctor" | "phd" | "md" | "jd" => Degree::Doctor,
            _ => Degree::Other,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Ipo(NaiveDate),
    Acquired(NaiveDate),
    None,
}

impl Outcome {
    pub fn date(&self) -> Option<NaiveDate> {
        match self {
            Outcome::Ipo(d) | Outcome::Acquired(d) => Some(*d),
            Outcome::None => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FundingRound {
    pub deal_id: String,
    pub date: NaiveDate,
    pub deal_type: DealType,
    pub amount: Option<f64>,
    pub investors: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartUpRecord {
    pub node: NodeId,
    pub external_id: String,
    pub name: String,
    pub founded: NaiveDate,
    pub industry: Industry,
    pub location: Option<(f64, f64)>,
    pub country: String,
    pub outcome: Outcome,
    /// Chronological.
    pub funding_rounds: Vec<FundingRound>,
}

impl StartUpRecord {
    pub fn first_funding(&self) -> Option<&FundingRound> {
        self.funding_rounds.first()
    }

    pub fn first_funding_date(&self) -> Option<NaiveDate> {
        self.first_funding().map(|r| r.date)
    }

    /// Whether a round after the first exists with a date on or before `by`.
    pub fn has_second_round(&self, by: Option<NaiveDate>) -> bool {
        self.funding_rounds
            .get(1)
            .is_some_and(|r| by.map_or(true, |b| r.date <= b))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersonRecord {
    pub node: NodeId,
    pub external_id: String,
    pub name: String,
    pub gender: Gender,
    pub degree: Degree,
    pub graduated_institute: Option<String>,
    pub graduated_year: Option<i32>,
}

/// Maps calendar dates to month indices and graph periods.
///
/// Month index 0 is the month of `epoch`. Everything in or before
/// `cutoff_month` belongs to the base period 0; month `cutoff_month + t`
/// is period `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calendar {
    pub epoch: NaiveDate,
    pub cutoff_month: i64,
}

impl Calendar {
    pub fn new(epoch: NaiveDate, cutoff_month: i64) -> Self {
        let epoch = epoch.with_day(1).expect("day 1 exists");
        Self { epoch, cutoff_month }
    }

    pub fn month_index(&self, date: NaiveDate) -> i64 {
        (date.year() as i64 - self.epoch.year() as i64) * 12 + date.month() as i64
            - self.epoch.month() as i64
    }

    pub fn period_of_month(&self, month: i64) -> Period {
        (month - self.cutoff_month).max(0) as Period
    }

    pub fn period_of(&self, date: NaiveDate) -> Period {
        self.period_of_month(self.month_index(date))
    }

    /// First day of month index `month`.
    pub fn month_start(&self, month: i64) -> NaiveDate {
        if month >= 0 {
            self.epoch + Months::new(month as u32)
        } else {
            self.epoch - Months::new((-month) as u32)
        }
    }

    /// First day of the month that forms period `period` (`period >= 1`).
    pub fn period_start(&self, period: Period) -> NaiveDate {
        self.month_start(self.cutoff_month + period as i64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forty_one_labels_over_seven_sectors() {
        assert_eq!(INDUSTRY_LABELS.len(), 41);
        for s in Sector::ALL {
            assert!(INDUSTRY_LABELS.iter().any(|(_, x)| *x == s));
        }
    }

    #[test]
    fn calendar_months() {
        let cal = Calendar::new(NaiveDate::from_ymd_opt(2010, 1, 15).unwrap(), 2);
        let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).unwrap();
        assert_eq!(cal.month_index(d(2010, 1, 31)), 0);
        assert_eq!(cal.month_index(d(2011, 3, 1)), 14);
        assert_eq!(cal.month_index(d(2009, 12, 1)), -1);
        assert_eq!(cal.period_of(d(2009, 6, 1)), 0);
        assert_eq!(cal.period_of(d(2010, 3, 9)), 0);
        assert_eq!(cal.period_of(d(2010, 4, 9)), 1);
        assert_eq!(cal.period_start(1), d(2010, 4, 1));
        assert_eq!(cal.month_start(-2), d(2009, 11, 1));
    }

    #[test]
    fn unknown_categories_fall_back() {
        assert_eq!(Degree::parse("Associate"), Degree::Other);
        assert_eq!(Gender::parse(""), Gender::Unknown);
        assert_eq!(DealType::parse("Mezzanine"), DealType::Other);
        assert_eq!(DealType::parse("seed"), DealType::Seed);
    }
}
