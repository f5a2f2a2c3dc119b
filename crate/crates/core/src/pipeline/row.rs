use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Feature pipelines of the ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RowName {
    #[serde(rename = "DEF")]
    Def,
    #[serde(rename = "DEF_2D")]
    Def2d,
    #[serde(rename = "VCG")]
    Vcg,
    #[serde(rename = "COV")]
    Cov,
    #[serde(rename = "VCG_COV")]
    VcgCov,
    #[serde(rename = "TS")]
    Ts,
    #[serde(rename = "TS_COV")]
    TsCov,
    #[serde(rename = "MTS")]
    Mts,
    #[serde(rename = "MTS_COV")]
    MtsCov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TangentChoice {
    None,
    Single,
    Multiple,
}

/// What a row does before the classifier sees the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowFlags {
    /// Extra training recordings from random VCG rotations.
    pub vcg_augment: bool,
    /// Work on covariance matrices instead of flattened time series.
    pub covariance: bool,
    /// Geodesic mixup on the training covariances.
    pub cov_mixup: bool,
    pub tangent: TangentChoice,
}

impl RowName {
    pub const ALL: [RowName; 9] = [
        RowName::Def,
        RowName::Def2d,
        RowName::Vcg,
        RowName::Cov,
        RowName::VcgCov,
        RowName::Ts,
        RowName::TsCov,
        RowName::Mts,
        RowName::MtsCov,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RowName::Def => "DEF",
            RowName::Def2d => "DEF_2D",
            RowName::Vcg => "VCG",
            RowName::Cov => "COV",
            RowName::VcgCov => "VCG_COV",
            RowName::Ts => "TS",
            RowName::TsCov => "TS_COV",
            RowName::Mts => "MTS",
            RowName::MtsCov => "MTS_COV",
        }
    }

    pub fn flags(self) -> RowFlags {
        use TangentChoice::*;
        let (vcg_augment, covariance, cov_mixup, tangent) = match self {
            RowName::Def | RowName::Def2d => (false, false, false, None),
            RowName::Vcg => (true, false, false, None),
            RowName::Cov => (false, true, false, None),
            RowName::VcgCov => (true, true, false, None),
            RowName::Ts => (false, true, false, Single),
            RowName::TsCov => (false, true, true, Single),
            RowName::Mts => (false, true, false, Multiple),
            RowName::MtsCov => (false, true, true, Multiple),
        };
        RowFlags { vcg_augment, covariance, cov_mixup, tangent }
    }

    /// Classifiers this row can feed. Minimum distance to mean needs SPD
    /// input or a single tangent space.
    pub fn supports(self, classifier: ClassifierKind) -> bool {
        match classifier {
            ClassifierKind::Mlp | ClassifierKind::Svm => true,
            ClassifierKind::Mdm => matches!(self, RowName::Cov | RowName::VcgCov | RowName::Ts | RowName::TsCov),
        }
    }
}

impl fmt::Display for RowName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseRowError(pub String);

impl fmt::Display for ParseRowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ParseRowError {}

impl FromStr for RowName {
    type Err = ParseRowError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        RowName::ALL.into_iter().find(|r| r.as_str() == upper).ok_or_else(|| {
            let names: Vec<&str> = RowName::ALL.iter().map(|r| r.as_str()).collect();
            ParseRowError(format!("unknown row '{s}'; expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Mlp,
    Svm,
    Mdm,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [ClassifierKind::Mlp, ClassifierKind::Svm, ClassifierKind::Mdm];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Mlp => "mlp",
            ClassifierKind::Svm => "svm",
            ClassifierKind::Mdm => "mdm",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = ParseRowError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mlp" => Ok(ClassifierKind::Mlp),
            "svm" => Ok(ClassifierKind::Svm),
            "mdm" => Ok(ClassifierKind::Mdm),
            _ => Err(ParseRowError(format!("unknown classifier '{s}'; expected mlp, svm or mdm"))),
        }
    }
}

/// One cell of the ablation grid. Written `ROW:classifier`, e.g. `MTS_COV:mlp`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct AblationRow {
    pub name: RowName,
    pub classifier: ClassifierKind,
}

impl AblationRow {
    pub fn new(name: RowName, classifier: ClassifierKind) -> Result<Self, ParseRowError> {
        if !name.supports(classifier) {
            return Err(ParseRowError(format!(
                "{name} with {classifier} is not part of the grid; mdm accepts only COV, VCG_COV, TS and TS_COV"
            )));
        }
        Ok(AblationRow { name, classifier })
    }

    pub fn flags(&self) -> RowFlags {
        self.name.flags()
    }

    /// Every supported cell, rows in grid order.
    pub fn grid() -> Vec<AblationRow> {
        RowName::ALL
            .into_iter()
            .flat_map(|r| ClassifierKind::ALL.into_iter().filter_map(move |c| AblationRow::new(r, c).ok()))
            .collect()
    }
}

impl fmt::Display for AblationRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name, self.classifier)
    }
}

impl FromStr for AblationRow {
    type Err = ParseRowError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (row, classifier) = s
            .split_once(':')
            .ok_or_else(|| ParseRowError(format!("expected ROW:classifier, e.g. MTS_COV:mlp, got '{s}'")))?;
        AblationRow::new(row.parse()?, classifier.parse()?)
    }
}

impl<'de> Deserialize<'de> for AblationRow {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            name: RowName,
            classifier: ClassifierKind,
        }
        let raw = Raw::deserialize(deserializer)?;
        AblationRow::new(raw.name, raw.classifier).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_matches_table_cells() {
        let grid = AblationRow::grid();
        assert_eq!(grid.len(), 9 * 2 + 4);
        for bad in ["MTS:mdm", "MTS_COV:mdm", "DEF:mdm", "DEF_2D:mdm", "VCG:mdm"] {
            assert!(bad.parse::<AblationRow>().is_err(), "{bad}");
        }
        for good in ["COV:mdm", "VCG_COV:mdm", "TS:mdm", "TS_COV:mdm", "mts_cov:MLP", "DEF_2D:svm"] {
            assert!(good.parse::<AblationRow>().is_ok(), "{good}");
        }
    }

    #[test]
    fn unknown_names_list_valid_rows() {
        let err = "FOO:mlp".parse::<AblationRow>().unwrap_err();
        assert!(err.0.contains("MTS_COV"));
        assert!("MTS_COV".parse::<AblationRow>().is_err());
        assert!("MTS_COV:knn".parse::<AblationRow>().is_err());
    }

    #[test]
    fn flags_follow_the_grid() {
        let f = RowName::MtsCov.flags();
        assert!(f.covariance && f.cov_mixup && !f.vcg_augment);
        assert_eq!(f.tangent, TangentChoice::Multiple);
        assert!(!RowName::Def.flags().covariance);
        assert!(RowName::VcgCov.flags().vcg_augment);
        assert_eq!(RowName::Ts.flags().tangent, TangentChoice::Single);
        assert!(!RowName::Ts.flags().cov_mixup && RowName::TsCov.flags().cov_mixup);
    }

    #[test]
    fn serde_rejects_unsupported_cells() {
        let row: AblationRow = serde_json::from_str(r#"{"name":"TS","classifier":"mdm"}"#).unwrap();
        assert_eq!(row.to_string(), "TS:mdm");
        assert_eq!(serde_json::to_string(&row).unwrap(), r#"{"name":"TS","classifier":"mdm"}"#);
        assert!(serde_json::from_str::<AblationRow>(r#"{"name":"MTS","classifier":"mdm"}"#).is_err());
    }
}
