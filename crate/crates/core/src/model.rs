//! Model persistence.
//!
//! A model file is a single versioned JSON document holding the transformed
//! training data (covariate histories, grid, frozen ECDF tables) together
//! with the fitted tree or ensemble: everything needed to route and score new
//! subjects. Files are written atomically (temp file + rename) so an
//! interrupted run never leaves a partial model behind.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::TransformedDataset;
use crate::error::{Error, Result};
use crate::forest::{ForestFit, ForestModel};
use crate::scalar::Scalar;
use crate::tree::{PartitionTree, TreeFit};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModelPayload<F> {
    Tree { tree: PartitionTree<F> },
    Forest { forest: ForestModel<F> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile<F> {
    pub schema_version: u32,
    pub seed: u64,
    pub tdata: TransformedDataset<F>,
    pub payload: ModelPayload<F>,
}

impl<F: Scalar> ModelFile<F> {
    pub fn tree(seed: u64, tree: PartitionTree<F>, tdata: TransformedDataset<F>) -> Self {
        ModelFile {
            schema_version: SCHEMA_VERSION,
            seed,
            tdata,
            payload: ModelPayload::Tree { tree },
        }
    }

    pub fn forest(seed: u64, forest: ForestModel<F>, tdata: TransformedDataset<F>) -> Self {
        ModelFile {
            schema_version: SCHEMA_VERSION,
            seed,
            tdata,
            payload: ModelPayload::Forest { forest },
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.payload {
            ModelPayload::Tree { .. } => "tree",
            ModelPayload::Forest { .. } => "forest",
        }
    }

    pub fn into_tree_fit(self) -> Result<TreeFit<F>> {
        match self.payload {
            ModelPayload::Tree { tree } => TreeFit::new(tree, self.tdata, None),
            ModelPayload::Forest { .. } => Err(Error::WrongModelKind {
                expected: "tree",
                found: "forest".into(),
            }),
        }
    }

    pub fn into_forest_fit(self) -> Result<ForestFit<F>> {
        match self.payload {
            ModelPayload::Forest { forest } => ForestFit::new(forest, self.tdata),
            ModelPayload::Tree { .. } => Err(Error::WrongModelKind {
                expected: "forest",
                found: "tree".into(),
            }),
        }
    }
}

/// Serializes the model to `path` atomically.
pub fn save_model<F: Scalar>(path: impl AsRef<Path>, model: &ModelFile<F>) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("tmp");
    {
        let file = std::fs::File::create(&tmp)?;
        let mut writer = std::io::BufWriter::new(file);
        serde_json::to_writer(&mut writer, model)?;
        writer.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Loads and version-checks a model file.
pub fn load_model<F: Scalar>(path: impl AsRef<Path>) -> Result<ModelFile<F>> {
    let file = std::fs::File::open(path)?;
    let model: ModelFile<F> = serde_json::from_reader(std::io::BufReader::new(file))?;
    if model.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found: model.schema_version,
            supported: SCHEMA_VERSION,
        });
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CovariatePath, Dataset, TransformedDataset};
    use crate::kernel::BandwidthPolicy;
    use crate::rng::stream;
    use crate::tree::{grow, GrowSettings};

    fn small_tdata() -> TransformedDataset<f64> {
        let mut state = 2u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        let subjects: Vec<_> = (0..40)
            .map(|i| {
                let z = next();
                let scale = if z > 0.5 { 0.4 } else { 1.1 };
                CovariatePath::constant(
                    format!("{i}"),
                    vec![z, next()],
                    (1e-3f64).max(-scale * (1.0 - next()).ln()),
                    true,
                )
                .unwrap()
            })
            .collect();
        let data = Dataset::new(subjects, None).unwrap();
        let grid = crate::data::uncensored_quantile_grid(&data, 6).unwrap();
        TransformedDataset::transform(data, grid).unwrap()
    }

    #[test]
    fn tree_round_trip_predicts_identically() {
        let tdata = small_tdata();
        let policy = BandwidthPolicy::global_default(tdata.data().uncensored_reference_time());
        let settings = GrowSettings {
            n_min: 8,
            ..Default::default()
        };
        let tree = grow(&tdata, &policy, &settings, &mut stream(1, "g", 0)).unwrap();
        let model = ModelFile::tree(1, tree, tdata);

        let dir = std::env::temp_dir().join(format!("rocsurv-model-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("tree.json");
        save_model(&path, &model).unwrap();
        // byte-identical reserialization
        save_model(&dir.join("tree2.json"), &model).unwrap();
        let a = std::fs::read(&path).unwrap();
        let b = std::fs::read(dir.join("tree2.json")).unwrap();
        assert_eq!(a, b);

        let loaded: ModelFile<f64> = load_model(&path).unwrap();
        let original = model.into_tree_fit().unwrap();
        let restored = loaded.into_tree_fit().unwrap();
        let path_new = CovariatePath::constant("n", vec![0.3, 0.8], 2.0, false).unwrap();
        let times: Vec<f64> = (0..20).map(|i| i as f64 * 0.08).collect();
        let (c1, _) = original.survival_curve(&path_new, &times).unwrap();
        let (c2, _) = restored.survival_curve(&path_new, &times).unwrap();
        assert_eq!(c1, c2);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn wrong_kind_is_reported() {
        let tdata = small_tdata();
        let policy = BandwidthPolicy::global_default(tdata.data().uncensored_reference_time());
        let tree = grow(
            &tdata,
            &policy,
            &GrowSettings::default(),
            &mut stream(1, "g", 0),
        )
        .unwrap();
        let model = ModelFile::tree(1, tree, tdata);
        assert!(matches!(
            model.into_forest_fit(),
            Err(Error::WrongModelKind { expected: "forest", .. })
        ));
    }
}
