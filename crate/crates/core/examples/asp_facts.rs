//! Fact export for an external ASP system, and reading its answer back.

use urbanflow::cli::{first_batch_instance, prepare};
use urbanflow::schedule::{check_schedule, objective};
use urbanflow::scenario::ScenarioFile;
use urbanflow::solver::{export_asp_facts, import_asp_model, render_asp_model, solve_exact};

const SCENARIO: &str = r#"
[network]
junctions = ["a", "b", "c", "d"]
streets = [
    { id = "s1", from = "a", to = "b", length = 150.0 },
    { id = "s2", from = "b", to = "c", length = 150.0 },
    { id = "s3", from = "b", to = "d", length = 100.0 },
]

[[demand]]
id = "v1"
origin = "s1"
destination = "s2"
"#;

fn main() {
    let scenario = ScenarioFile::parse(SCENARIO).unwrap().resolve().unwrap();
    let (network, _, demand) = prepare(&scenario).unwrap();
    let instance = first_batch_instance(&scenario, &network, &demand).unwrap();

    let facts = export_asp_facts(&instance);
    for line in facts.lines().filter(|l| !l.starts_with("time(")) {
        println!("{line}");
    }

    let result = solve_exact(&instance, &scenario.solver).unwrap();
    // what a solver would print: chatter around the atoms
    let answer = format!("Answer: 1\n{}\nOptimization: {} {}\n", render_asp_model(&result.schedule).replace('\n', " "), result.objective.level2, result.objective.level1);
    println!("\n{answer}");
    let back = import_asp_model(&answer, &instance).unwrap();
    assert_eq!(back.canonical(), result.schedule.canonical());
    assert!(check_schedule(&instance, &back).is_empty());
    println!("read back, objective {}", objective(&instance, &back));
}
