//! Python bindings. Configuration objects cross the boundary as JSON
//! strings with the same schema as the Rust `serde` types; omitted fields
//! take their defaults.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::de::DeserializeOwned;

use lifenav_core::agent_sim::{self, Action, ActionParams};
use lifenav_core::compressor::{self, CompressionConfig};
use lifenav_core::datagen::{self, ExplorerConfig, GoatConfig};
use lifenav_core::grid::Traversable;
use lifenav_core::memory::{self, FrameRecord, ObservedObject};
use lifenav_core::metrics::{self, EpisodeOutcome};
use lifenav_core::scene::{self, SceneParams};

fn err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn from_json<T: DeserializeOwned + Default>(text: Option<&str>) -> PyResult<T> {
    text.map_or_else(|| Ok(T::default()), |t| serde_json::from_str(t).map_err(err))
}

fn action(name: &str) -> PyResult<Action> {
    serde_json::from_value(serde_json::Value::String(name.to_uppercase())).map_err(|_| err(format!("unknown action {name:?}")))
}

#[pyclass(name = "Scene", module = "lifenav", frozen)]
struct PyScene(scene::Scene);

#[pymethods]
impl PyScene {
    /// Generate a connected scene; `params_json` overrides scene parameters.
    #[staticmethod]
    #[pyo3(signature = (seed, params_json=None))]
    fn generate(seed: u64, params_json: Option<&str>) -> PyResult<Self> {
        let params: SceneParams = from_json(params_json)?;
        scene::generate_scene(seed, &params).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        scene::Scene::from_json(text).map(Self).map_err(err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn scene_id(&self) -> &str {
        self.0.scene_id()
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    #[getter]
    fn cell_size(&self) -> f64 {
        self.0.cell_size()
    }

    fn categories(&self) -> Vec<String> {
        self.0.categories()
    }

    /// `(object_id, category, x, y)` tuples.
    fn objects(&self) -> Vec<(String, String, f64, f64)> {
        self.0.objects().iter().map(|o| (o.object_id.clone(), o.category.clone(), o.x, o.y)).collect()
    }

    fn is_free(&self, x: f64, y: f64) -> bool {
        self.0.is_free_position(x, y)
    }

    fn is_connected(&self) -> bool {
        self.0.is_connected()
    }

    fn __repr__(&self) -> String {
        format!("Scene({:?}, {}x{})", self.0.scene_id(), self.0.width(), self.0.height())
    }
}

#[pyclass(name = "Pose", module = "lifenav", frozen)]
struct PyPose(agent_sim::Pose);

#[pymethods]
impl PyPose {
    #[new]
    #[pyo3(signature = (x, y, yaw=0.0))]
    fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self(agent_sim::Pose::new(x, y, yaw))
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        agent_sim::parse_pose(text).map(Self).map_err(err)
    }

    #[getter]
    fn x(&self) -> f64 {
        self.0.position.x
    }

    #[getter]
    fn y(&self) -> f64 {
        self.0.position.y
    }

    #[getter]
    fn yaw(&self) -> f64 {
        self.0.yaw()
    }

    /// `(w, x, y, z)`.
    #[getter]
    fn quaternion(&self) -> (f64, f64, f64, f64) {
        let q = self.0.orientation;
        (q.w, q.x, q.y, q.z)
    }

    fn text(&self) -> String {
        agent_sim::serialize_pose(&self.0)
    }

    fn __repr__(&self) -> String {
        format!("Pose({})", agent_sim::serialize_pose(&self.0))
    }
}

/// Apply one of MOVE_FORWARD, TURN_LEFT, TURN_RIGHT, STOP.
#[pyfunction]
#[pyo3(signature = (scene, pose, action_name, forward_m=agent_sim::DEFAULT_FORWARD_M, turn_deg=agent_sim::DEFAULT_TURN_DEG))]
fn step(scene: &PyScene, pose: &PyPose, action_name: &str, forward_m: f64, turn_deg: f64) -> PyResult<PyPose> {
    let a = action(action_name)?;
    Ok(PyPose(agent_sim::step(&scene.0, &pose.0, a, &ActionParams { forward_m, turn_deg })))
}

/// Visible `(row, col)` cells and `(object_id, category, x, y)` objects.
#[pyfunction]
#[pyo3(signature = (scene, pose, fov_degrees=agent_sim::DEFAULT_FOV_DEG, range_m=agent_sim::DEFAULT_RANGE_M))]
#[allow(clippy::type_complexity)]
fn observe(
    scene: &PyScene,
    pose: &PyPose,
    fov_degrees: f64,
    range_m: f64,
) -> (Vec<(usize, usize)>, Vec<(String, String, f64, f64)>) {
    let obs = agent_sim::observe(&scene.0, &pose.0, fov_degrees, range_m);
    (
        obs.visible_cells.iter().map(|c| (c.row, c.col)).collect(),
        obs.visible_objects.into_iter().map(|o| (o.object_id, o.category, o.x, o.y)).collect(),
    )
}

#[pyfunction]
fn check_success(pose: &PyPose, x: f64, y: f64) -> bool {
    agent_sim::check_success(&pose.0, x, y)
}

fn compression(num_blocks: usize, config_json: Option<&str>) -> PyResult<CompressionConfig> {
    match config_json {
        Some(t) => serde_json::from_str(t).map_err(err),
        None => Ok(CompressionConfig::with_blocks(num_blocks)),
    }
}

#[pyfunction]
#[pyo3(signature = (num_blocks=2, config_json=None))]
fn token_count(num_blocks: usize, config_json: Option<&str>) -> PyResult<usize> {
    compressor::token_count(&compression(num_blocks, config_json)?).map_err(err)
}

/// `(r_spatial, r_native)`.
#[pyfunction]
#[pyo3(signature = (num_blocks=2, config_json=None))]
fn compression_ratio(num_blocks: usize, config_json: Option<&str>) -> PyResult<(u64, f64)> {
    compressor::compression_ratio(&compression(num_blocks, config_json)?).map_err(err)
}

/// Tokens of one pseudo frame as a list of rows.
#[pyfunction]
#[pyo3(signature = (frame_seed, num_blocks=2, config_json=None))]
fn compress_frame(py: Python<'_>, frame_seed: u64, num_blocks: usize, config_json: Option<&str>) -> PyResult<Vec<Vec<f32>>> {
    let cfg = compression(num_blocks, config_json)?;
    let tokens = py.detach(|| compressor::compress_frame(frame_seed, &cfg)).map_err(err)?;
    Ok((0..tokens.len()).map(|i| tokens.token(i).to_vec()).collect())
}

#[pyfunction]
#[pyo3(signature = (budget_tokens, tokens_per_frame, pose_text_tokens=0, fixed_overheads=0))]
fn max_history(budget_tokens: u64, tokens_per_frame: u64, pose_text_tokens: u64, fixed_overheads: u64) -> PyResult<u64> {
    if tokens_per_frame + pose_text_tokens == 0 {
        return Err(err("a frame must cost at least one token"));
    }
    Ok(memory::max_history(budget_tokens, tokens_per_frame, pose_text_tokens, fixed_overheads))
}

#[pyclass(name = "MemoryBank", module = "lifenav")]
struct PyMemoryBank(memory::MemoryBank);

#[pymethods]
impl PyMemoryBank {
    #[new]
    #[pyo3(signature = (max_frames, tokens_per_frame, system_prompt_tokens=0, instruction_tokens=0, pose_text_tokens=0))]
    fn new(
        max_frames: usize,
        tokens_per_frame: usize,
        system_prompt_tokens: usize,
        instruction_tokens: usize,
        pose_text_tokens: usize,
    ) -> PyResult<Self> {
        let bank = memory::MemoryBank::new(max_frames, tokens_per_frame).map_err(err)?;
        Ok(Self(bank.with_overheads(system_prompt_tokens, instruction_tokens, pose_text_tokens)))
    }

    /// Store a frame; `observed` holds `(category, x, y)`. Returns the
    /// evicted frame index, if any.
    #[pyo3(signature = (frame_index, pose, frame_seed, observed=vec![]))]
    fn append(&mut self, frame_index: usize, pose: &PyPose, frame_seed: u64, observed: Vec<(String, f64, f64)>) -> PyResult<Option<usize>> {
        let record = FrameRecord {
            frame_index,
            pose: pose.0,
            pose_text: agent_sim::serialize_pose(&pose.0),
            frame_seed,
            token_count: self.0.tokens_per_frame,
            observed: observed.into_iter().map(|(category, x, y)| ObservedObject { category, x, y }).collect(),
        };
        Ok(self.0.append_frame(record).map_err(err)?.map(|f| f.frame_index))
    }

    /// `(x, y, frame_index)` of the newest sighting.
    fn recall(&self, category: &str) -> Option<(f64, f64, usize)> {
        self.0.recall_target(category).map(|r| (r.x, r.y, r.frame_index))
    }

    fn frame_indices(&self) -> Vec<usize> {
        self.0.frames().map(|f| f.frame_index).collect()
    }

    fn context_tokens(&self) -> u64 {
        self.0.context_tokens()
    }

    fn attention_cost_proxy(&self) -> u128 {
        self.0.attention_cost_proxy()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

fn outcomes(success: Vec<bool>, path_length: Vec<f64>, shortest_length: Vec<f64>) -> PyResult<Vec<EpisodeOutcome>> {
    if success.len() != path_length.len() || success.len() != shortest_length.len() {
        return Err(err("success, path_length and shortest_length must have equal lengths"));
    }
    Ok(success
        .into_iter()
        .zip(path_length)
        .zip(shortest_length)
        .map(|((success, path_length), shortest_length)| EpisodeOutcome {
            success,
            path_length,
            shortest_length,
            category: String::new(),
            steps: 0,
            context_tokens_final: 0,
        })
        .collect())
}

#[pyfunction]
fn success_rate(success: Vec<bool>) -> PyResult<f64> {
    let n = success.len();
    metrics::success_rate(&outcomes(success, vec![1.0; n], vec![1.0; n])?).map_err(err)
}

#[pyfunction]
fn spl(success: Vec<bool>, path_length: Vec<f64>, shortest_length: Vec<f64>) -> PyResult<f64> {
    metrics::spl(&outcomes(success, path_length, shortest_length)?).map_err(err)
}

/// One single-goal episode as a JSON object string.
#[pyfunction]
#[pyo3(signature = (scene, seed, config_json=None))]
fn generate_ovon_episode(py: Python<'_>, scene: &PyScene, seed: u64, config_json: Option<&str>) -> PyResult<String> {
    let cfg: ExplorerConfig = from_json(config_json)?;
    let ep = py.detach(|| datagen::generate_ovon_episode(&scene.0, seed, &cfg)).map_err(err)?;
    serde_json::to_string(&ep).map_err(err)
}

/// One lifelong sequence as a JSON array of subtask episodes.
#[pyfunction]
#[pyo3(signature = (scene, seed, num_subtasks=3, memory_length=100, config_json=None))]
fn generate_goat_sequence(
    py: Python<'_>,
    scene: &PyScene,
    seed: u64,
    num_subtasks: usize,
    memory_length: usize,
    config_json: Option<&str>,
) -> PyResult<String> {
    let cfg: GoatConfig = from_json(config_json)?;
    let seq = py.detach(|| datagen::generate_goat_sequence(&scene.0, seed, num_subtasks, memory_length, &cfg)).map_err(err)?;
    serde_json::to_string(&seq.subtasks).map_err(err)
}

#[pymodule]
fn lifenav(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScene>()?;
    m.add_class::<PyPose>()?;
    m.add_class::<PyMemoryBank>()?;
    m.add_function(wrap_pyfunction!(step, m)?)?;
    m.add_function(wrap_pyfunction!(observe, m)?)?;
    m.add_function(wrap_pyfunction!(check_success, m)?)?;
    m.add_function(wrap_pyfunction!(token_count, m)?)?;
    m.add_function(wrap_pyfunction!(compression_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(compress_frame, m)?)?;
    m.add_function(wrap_pyfunction!(max_history, m)?)?;
    m.add_function(wrap_pyfunction!(success_rate, m)?)?;
    m.add_function(wrap_pyfunction!(spl, m)?)?;
    m.add_function(wrap_pyfunction!(generate_ovon_episode, m)?)?;
    m.add_function(wrap_pyfunction!(generate_goat_sequence, m)?)?;
    m.add("SUCCESS_RADIUS_M", agent_sim::SUCCESS_RADIUS_M)?;
    Ok(())
}
