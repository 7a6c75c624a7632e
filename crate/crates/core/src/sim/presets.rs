//! Named experiment presets.

use crate::error::{Error, Result};
use crate::interference::Component;

use super::config::{CovariateTerm, GraphSpec, Interference, Method, Noise, OutcomeModel, SimConfig};
use super::generate::Design;

pub const PRESET_NAMES: [&str; 16] = [
    "exp1-s1",
    "exp1-s2",
    "exp1-s3",
    "exp1-s4",
    "exp2-b5",
    "exp2-b20",
    "exp2-b25",
    "exp3",
    "mult-s1",
    "mult-s2",
    "mult-s3",
    "mult-s4",
    "sbm",
    "hetero",
    "true-f",
    "matchqual",
];

/// Additive weights of the four main settings, in the order treated
/// degree, triangles, 2-stars, 4-stars, dagger, betweenness, closeness.
pub const ADDITIVE_SETTINGS: [[f64; 7]; 4] = [
    [0.0, 10.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [10.0, 10.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 10.0, 1.0, 1.0, 1.0, 1.0, -1.0],
    [5.0, 1.0, 10.0, 1.0, 1.0, 1.0, -1.0],
];

fn base(name: String, graph: GraphSpec, treated: usize, interference: Interference, replications: usize) -> SimConfig {
    SimConfig {
        name,
        graph,
        fixed_graph: false,
        design: Design::Complete { treated },
        outcome: OutcomeModel {
            interference,
            ..OutcomeModel::default()
        },
        methods: Method::STANDARD.to_vec(),
        replications,
        seed: 0,
        census: Default::default(),
        bins: Default::default(),
        matching: Default::default(),
        baselines: Default::default(),
        match_quality: false,
    }
}

fn additive(setting: usize) -> Interference {
    Interference::Additive {
        weights: ADDITIVE_SETTINGS[setting].to_vec(),
        zscore: true,
    }
}

fn er(n: usize, q: f64) -> GraphSpec {
    GraphSpec::Er { n, q }
}

fn exp1(setting: usize) -> SimConfig {
    base(
        format!("exp1-s{}", setting + 1),
        er(50, 0.05),
        25,
        additive(setting),
        50,
    )
}

fn exp2(beta: f64, replications: usize) -> SimConfig {
    let mut c = base(
        format!("exp2-b{beta}"),
        er(50, 0.05),
        25,
        Interference::Additive {
            weights: vec![1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
            zscore: true,
        },
        replications,
    );
    c.outcome.covariate = Some(CovariateTerm {
        beta,
        levels: vec![1, 2, 3],
    });
    c
}

fn exp3() -> Vec<SimConfig> {
    [0.0, 2.5, 5.0]
        .into_iter()
        .map(|gamma| {
            let mut c = base(
                format!("exp3-g{gamma}"),
                er(75, 0.07),
                37,
                Interference::Misspecified { gamma, zscore: true },
                50,
            );
            c.fixed_graph = true;
            c
        })
        .collect()
}

fn multiplicative(setting: usize) -> SimConfig {
    let components = match setting {
        0 => vec![Component::TreatedDegree, Component::Triangles],
        1 => vec![Component::TreatedDegree, Component::Betweenness],
        2 => vec![Component::Triangles, Component::Betweenness],
        _ => vec![Component::Triangles, Component::Stars(4)],
    };
    base(
        format!("mult-s{}", setting + 1),
        er(50, 0.05),
        25,
        Interference::Multiplicative {
            components,
            scale: 1.0,
            zscore: false,
        },
        50,
    )
}

fn per_setting(prefix: &str, make: impl Fn(usize) -> SimConfig) -> Vec<SimConfig> {
    (0..4)
        .map(|s| {
            let mut c = make(s);
            c.name = format!("{prefix}-s{}", s + 1);
            c
        })
        .collect()
}

/// Settings of a named preset with their default replication counts and
/// seed.
pub fn preset(name: &str) -> Result<Vec<SimConfig>> {
    let configs = match name {
        "exp1-s1" => vec![exp1(0)],
        "exp1-s2" => vec![exp1(1)],
        "exp1-s3" => vec![exp1(2)],
        "exp1-s4" => vec![exp1(3)],
        "exp2-b5" => vec![exp2(5.0, 40)],
        "exp2-b20" => vec![exp2(20.0, 10)],
        "exp2-b25" => vec![exp2(25.0, 10)],
        "exp3" => exp3(),
        "mult-s1" => vec![multiplicative(0)],
        "mult-s2" => vec![multiplicative(1)],
        "mult-s3" => vec![multiplicative(2)],
        "mult-s4" => vec![multiplicative(3)],
        "sbm" => per_setting("sbm", |s| {
            let sizes = vec![10; 5];
            let mut c = base(
                String::new(),
                GraphSpec::Sbm {
                    sizes: sizes.clone(),
                    p_within: 0.3,
                    p_between: 0.05,
                },
                25,
                additive(s),
                50,
            );
            c.design = Design::PerBlock {
                sizes,
                treated_per_block: 5,
            };
            c
        }),
        "hetero" => per_setting("hetero", |s| {
            let mut c = base(String::new(), er(50, 0.07), 25, additive(s), 50);
            c.fixed_graph = true;
            c.outcome.noise = Noise::Heteroskedastic;
            c
        }),
        "true-f" => per_setting("true-f", |s| {
            let mut c = base(String::new(), er(50, 0.07), 25, additive(s), 50);
            c.fixed_graph = true;
            c.methods.push(Method::TrueInterference);
            c
        }),
        "matchqual" => {
            let mut c = base("matchqual".into(), er(50, 0.07), 25, additive(3), 50);
            c.fixed_graph = true;
            c.match_quality = true;
            c.methods = vec![Method::Flame, Method::AllEigenvectors, Method::TrueInterference];
            vec![c]
        }
        other => {
            return Err(Error::UnknownPreset {
                name: other.to_string(),
                available: PRESET_NAMES.join(", "),
            })
        }
    };
    Ok(configs)
}
