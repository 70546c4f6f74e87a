use std::path::PathBuf;

use coexist_cli::config::{read_config, CoexistConfig, PhaseDiagramConfig, TuneConfig};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn shipped_configs_materialize() {
    let pd: PhaseDiagramConfig = read_config(&config("phase_diagram_d15_q45.json")).unwrap();
    pd.materialize().unwrap();
    for name in ["coexist_d3_q8.json", "coexist_ising.json"] {
        let c: CoexistConfig = read_config(&config(name)).unwrap();
        c.materialize(None).unwrap();
    }
    let t: TuneConfig = read_config(&config("tune_d3_q5.json")).unwrap();
    t.materialize().unwrap().params().unwrap();
}
