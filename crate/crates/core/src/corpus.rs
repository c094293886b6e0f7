//! Bundled domains, problems, extraction fixtures and task texts.

pub struct DomainFile {
    pub name: &'static str,
    pub source: &'static str,
}

pub struct ProblemFile {
    pub name: &'static str,
    pub domain: &'static str,
    pub source: &'static str,
}

/// A natural-language task with its ground-truth extraction record.
pub struct Fixture {
    pub id: &'static str,
    pub domain: &'static str,
    pub task: &'static str,
    pub record: &'static str,
}

macro_rules! data {
    ($path:literal) => {
        include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/", $path))
    };
}

pub const DOMAINS: &[DomainFile] = &[
    DomainFile { name: "blocksworld", source: data!("domains/blocksworld.pddl") },
    DomainFile { name: "gripper", source: data!("domains/gripper.pddl") },
    DomainFile { name: "visitall", source: data!("domains/visitall.pddl") },
    DomainFile { name: "tabletop", source: data!("domains/tabletop.pddl") },
    DomainFile { name: "kitchen", source: data!("domains/kitchen.pddl") },
];

pub const PROBLEMS: &[ProblemFile] = &[
    ProblemFile { name: "bw-sussman", domain: "blocksworld", source: data!("problems/bw-sussman.pddl") },
    ProblemFile { name: "bw-4", domain: "blocksworld", source: data!("problems/bw-4.pddl") },
    ProblemFile { name: "bw-5", domain: "blocksworld", source: data!("problems/bw-5.pddl") },
    ProblemFile { name: "gripper-2", domain: "gripper", source: data!("problems/gripper-2.pddl") },
    ProblemFile { name: "gripper-3", domain: "gripper", source: data!("problems/gripper-3.pddl") },
    ProblemFile { name: "gripper-4", domain: "gripper", source: data!("problems/gripper-4.pddl") },
    ProblemFile { name: "visitall-2x2", domain: "visitall", source: data!("problems/visitall-2x2.pddl") },
    ProblemFile { name: "visitall-3x3", domain: "visitall", source: data!("problems/visitall-3x3.pddl") },
    ProblemFile { name: "visitall-3x4", domain: "visitall", source: data!("problems/visitall-3x4.pddl") },
    ProblemFile { name: "tabletop-listing", domain: "tabletop", source: data!("problems/tabletop-listing.pddl") },
    ProblemFile { name: "kitchen-heat", domain: "kitchen", source: data!("problems/kitchen-heat.pddl") },
];

pub const FIXTURES: &[Fixture] = &[
    Fixture {
        id: "tabletop-apple",
        domain: "tabletop",
        task: data!("tasks/tabletop-apple.txt"),
        record: data!("fixtures/tabletop-apple.json"),
    },
    Fixture {
        id: "sussman",
        domain: "blocksworld",
        task: data!("tasks/sussman.txt"),
        record: data!("fixtures/sussman.json"),
    },
    Fixture {
        id: "gripper-one-hand",
        domain: "gripper",
        task: data!("tasks/gripper-one-hand.txt"),
        record: data!("fixtures/gripper-one-hand.json"),
    },
    Fixture {
        id: "corridor",
        domain: "visitall",
        task: data!("tasks/corridor.txt"),
        record: data!("fixtures/corridor.json"),
    },
    Fixture {
        id: "kitchen-heat",
        domain: "kitchen",
        task: data!("tasks/kitchen-heat.txt"),
        record: data!("fixtures/kitchen-heat.json"),
    },
];

pub fn domain(name: &str) -> Option<&'static DomainFile> {
    DOMAINS.iter().find(|d| d.name == name)
}

pub fn problem(name: &str) -> Option<&'static ProblemFile> {
    PROBLEMS.iter().find(|p| p.name == name)
}

pub fn fixture(id: &str) -> Option<&'static Fixture> {
    FIXTURES.iter().find(|f| f.id == id)
}
