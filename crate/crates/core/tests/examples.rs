//! Builds and runs every example program.

mod admissibility_table {
    include!("../examples/admissibility_table.rs");

    pub fn run() -> spde_wave::Result<()> {
        main()
    }
}

mod sample_noise {
    include!("../examples/sample_noise.rs");

    pub fn run() -> spde_wave::Result<()> {
        main()
    }
}

mod isometry_check {
    include!("../examples/isometry_check.rs");

    pub fn run() -> spde_wave::Result<()> {
        main()
    }
}

mod mollifier_ladder {
    include!("../examples/mollifier_ladder.rs");

    pub fn run() -> spde_wave::Result<()> {
        main()
    }
}

mod picard_vs_sweep {
    include!("../examples/picard_vs_sweep.rs");

    pub fn run() -> spde_wave::Result<()> {
        main()
    }
}

mod moment_envelope {
    include!("../examples/moment_envelope.rs");

    pub fn run() -> spde_wave::Result<()> {
        main()
    }
}

mod energy_conservation {
    include!("../examples/energy_conservation.rs");

    pub fn run() -> spde_wave::Result<()> {
        main()
    }
}

mod finite_speed {
    include!("../examples/finite_speed.rs");

    pub fn run() -> spde_wave::Result<()> {
        main()
    }
}

mod weighted_solver {
    include!("../examples/weighted_solver.rs");

    pub fn run() -> spde_wave::Result<()> {
        main()
    }
}

mod j_functional {
    include!("../examples/j_functional.rs");

    pub fn run() -> spde_wave::Result<()> {
        main()
    }
}

mod aggregate_tables {
    include!("../examples/aggregate_tables.rs");

    pub fn run() -> spde_wave::Result<()> {
        main()
    }
}

#[test]
fn admissibility_table_runs() {
    admissibility_table::run().unwrap();
}

#[test]
fn sample_noise_runs() {
    sample_noise::run().unwrap();
}

#[test]
fn isometry_check_runs() {
    isometry_check::run().unwrap();
}

#[test]
fn mollifier_ladder_runs() {
    mollifier_ladder::run().unwrap();
}

#[test]
fn picard_vs_sweep_runs() {
    picard_vs_sweep::run().unwrap();
}

#[test]
fn moment_envelope_runs() {
    moment_envelope::run().unwrap();
}

#[test]
fn energy_conservation_runs() {
    energy_conservation::run().unwrap();
}

#[test]
fn finite_speed_runs() {
    finite_speed::run().unwrap();
}

#[test]
fn weighted_solver_runs() {
    weighted_solver::run().unwrap();
}

#[test]
fn j_functional_runs() {
    j_functional::run().unwrap();
}

#[test]
fn aggregate_tables_runs() {
    aggregate_tables::run().unwrap();
}
