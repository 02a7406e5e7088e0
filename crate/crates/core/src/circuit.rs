//! Circuit representation, text parsing, noise insertion, compilation to
//! sampling plans, and dynamic execution with measurement feedback.
//!
//! The text format is line-based, one instruction per line:
//!
//! ```text
//! qubits 2
//! h 0
//! cnot 0 1
//! noise depolarizing(0.001) 0 1
//! measure_pauli +ZZ -> 0
//! mr 1 -> 1
//! barrier
//! ```
//!
//! Consecutive instructions on disjoint qubits fuse into one timestep;
//! `barrier` forces a boundary. Noise insertion appends one noise
//! instruction per touched qubit after each timestep.

use crate::channels::{CliffordAction, StabilizerChannelTerm, StabilizerDecomposition};
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString};
use crate::sampler::{ChannelApplication, PreparedChannel, SimulationPlan};
use crate::tableau::Tableau;
use rand::Rng;
use std::collections::HashMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    H(usize),
    S(usize),
    X(usize),
    Y(usize),
    Z(usize),
    Cnot(usize, usize),
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H(q) | Gate::S(q) | Gate::X(q) | Gate::Y(q) | Gate::Z(q) => vec![q],
            Gate::Cnot(c, t) => vec![c, t],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instruction {
    Gate(Gate),
    Noise {
        name: String,
        params: Vec<f64>,
        qubits: Vec<usize>,
    },
    MeasurePauli {
        observable: PauliString,
        cbit: usize,
    },
    ResetPauli {
        target: PauliString,
    },
    /// Computational-basis measurement into a classical bit, then reset of
    /// the qubit to |0⟩.
    MeasureReset {
        qubit: usize,
        cbit: usize,
    },
}

impl Instruction {
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Instruction::Gate(g) => g.qubits(),
            Instruction::Noise { qubits, .. } => qubits.clone(),
            Instruction::MeasurePauli { observable, .. } => support(observable),
            Instruction::ResetPauli { target } => support(target),
            Instruction::MeasureReset { qubit, .. } => vec![*qubit],
        }
    }

    pub fn is_measurement(&self) -> bool {
        matches!(
            self,
            Instruction::MeasurePauli { .. } | Instruction::MeasureReset { .. }
        )
    }
}

fn support(p: &PauliString) -> Vec<usize> {
    (0..p.num_qubits()).filter(|&q| p.get(q) != Pauli::I).collect()
}

/// A scheduled circuit: ordered timesteps of instructions with disjoint
/// qubit sets inside each step.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n: usize,
    steps: Vec<Vec<Instruction>>,
}

impl Circuit {
    pub fn new(n: usize) -> Self {
        Circuit {
            n,
            steps: Vec::new(),
        }
    }

    pub fn from_steps(n: usize, steps: Vec<Vec<Instruction>>) -> Result<Self> {
        let c = Circuit { n, steps };
        c.validate()?;
        Ok(c)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn steps(&self) -> &[Vec<Instruction>] {
        &self.steps
    }

    pub fn num_instructions(&self) -> usize {
        self.steps.iter().map(|s| s.len()).sum()
    }

    /// Append with greedy fusion: joins the last step when qubit sets are
    /// disjoint.
    pub fn push(&mut self, instr: Instruction) {
        let qs = instr.qubits();
        if let Some(last) = self.steps.last_mut() {
            let used: Vec<usize> = last.iter().flat_map(|i| i.qubits()).collect();
            if qs.iter().all(|q| !used.contains(q)) {
                last.push(instr);
                return;
            }
        }
        self.steps.push(vec![instr]);
    }

    /// Append as a fresh timestep.
    pub fn push_step(&mut self, step: Vec<Instruction>) {
        if !step.is_empty() {
            self.steps.push(step);
        }
    }

    /// Force a timestep boundary for subsequent [`Circuit::push`] calls.
    pub fn barrier(&mut self) {
        if self.steps.last().map(|s| !s.is_empty()).unwrap_or(false) {
            self.steps.push(Vec::new());
        }
    }

    fn validate(&self) -> Result<()> {
        let mut cbits_seen = Vec::new();
        for step in &self.steps {
            let mut used = Vec::new();
            for instr in step {
                for q in instr.qubits() {
                    if q >= self.n {
                        return Err(Error::QubitOutOfRange { qubit: q, n: self.n });
                    }
                    if used.contains(&q) {
                        return Err(Error::InvalidPlan(format!(
                            "qubit {q} used twice in one timestep"
                        )));
                    }
                    used.push(q);
                }
                match instr {
                    Instruction::MeasurePauli { cbit, .. }
                    | Instruction::MeasureReset { cbit, .. } => {
                        if cbits_seen.contains(cbit) {
                            return Err(Error::InvalidPlan(format!(
                                "classical bit {cbit} assigned twice"
                            )));
                        }
                        cbits_seen.push(*cbit);
                    }
                    Instruction::Gate(Gate::Cnot(c, t)) if c == t => {
                        return Err(Error::InvalidPlan("cnot control equals target".into()));
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub fn num_classical_bits(&self) -> usize {
        self.steps
            .iter()
            .flatten()
            .filter_map(|i| match i {
                Instruction::MeasurePauli { cbit, .. }
                | Instruction::MeasureReset { cbit, .. } => Some(cbit + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Render to the text format; reparsing yields an equal circuit.
    pub fn render(&self) -> String {
        let mut out = format!("qubits {}\n", self.n);
        for (i, step) in self.steps.iter().enumerate() {
            if i > 0 {
                out.push_str("barrier\n");
            }
            for instr in step {
                out.push_str(&render_instruction(instr));
                out.push('\n');
            }
        }
        out
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render())
    }
}

fn render_instruction(instr: &Instruction) -> String {
    match instr {
        Instruction::Gate(Gate::H(q)) => format!("h {q}"),
        Instruction::Gate(Gate::S(q)) => format!("s {q}"),
        Instruction::Gate(Gate::X(q)) => format!("x {q}"),
        Instruction::Gate(Gate::Y(q)) => format!("y {q}"),
        Instruction::Gate(Gate::Z(q)) => format!("z {q}"),
        Instruction::Gate(Gate::Cnot(c, t)) => format!("cnot {c} {t}"),
        Instruction::Noise {
            name,
            params,
            qubits,
        } => {
            let params = params
                .iter()
                .map(|p| format!("{p}"))
                .collect::<Vec<_>>()
                .join(",");
            let qubits = qubits
                .iter()
                .map(|q| q.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            format!("noise {name}({params}) {qubits}")
        }
        Instruction::MeasurePauli { observable, cbit } => {
            format!("measure_pauli {observable} -> {cbit}")
        }
        Instruction::ResetPauli { target } => format!("reset_pauli {target}"),
        Instruction::MeasureReset { qubit, cbit } => format!("mr {qubit} -> {cbit}"),
    }
}

/// Parse the text format with line/column error reporting.
pub fn parse(text: &str) -> Result<Circuit> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        });

    let err = |line: usize, col: usize, msg: &str| Error::CircuitParse {
        line,
        col,
        msg: msg.to_string(),
    };

    let (first_no, first) = lines
        .next()
        .ok_or_else(|| err(1, 1, "empty circuit; expected `qubits N`"))?;
    let mut head = first.split_whitespace();
    if head.next() != Some("qubits") {
        return Err(err(first_no, 1, "expected `qubits N`"));
    }
    let n: usize = head
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| err(first_no, 8, "expected qubit count"))?;
    if head.next().is_some() {
        return Err(err(first_no, 1, "trailing tokens after qubit count"));
    }
    if n == 0 {
        return Err(err(first_no, 8, "qubit count must be positive"));
    }

    let mut circuit = Circuit::new(n);
    let mut cbits = Vec::new();
    for (line_no, raw) in lines {
        let line = raw.trim();
        let col_of = |token: &str| raw.find(token).map(|i| i + 1).unwrap_or(1);
        let mut tokens = line.split_whitespace();
        let head = tokens.next().unwrap();
        let rest: Vec<&str> = tokens.collect();

        let parse_qubit = |tok: &str| -> Result<usize> {
            let q: usize = tok
                .parse()
                .map_err(|_| err(line_no, col_of(tok), "expected qubit index"))?;
            if q >= n {
                return Err(err(
                    line_no,
                    col_of(tok),
                    &format!("qubit {q} not declared (qubits {n})"),
                ));
            }
            Ok(q)
        };
        let parse_pauli = |tok: &str| -> Result<PauliString> {
            let p: PauliString = tok
                .parse()
                .map_err(|_| err(line_no, col_of(tok), "expected a signed Pauli string"))?;
            if p.num_qubits() != n {
                return Err(err(
                    line_no,
                    col_of(tok),
                    &format!("Pauli length {} does not match qubits {n}", p.num_qubits()),
                ));
            }
            if !p.is_hermitian() {
                return Err(err(line_no, col_of(tok), "Pauli sign must be + or -"));
            }
            Ok(p)
        };

        match head {
            "barrier" => {
                if !rest.is_empty() {
                    return Err(err(line_no, col_of(rest[0]), "barrier takes no arguments"));
                }
                circuit.barrier();
            }
            "h" | "s" | "x" | "y" | "z" => {
                if rest.len() != 1 {
                    return Err(err(line_no, 1, "expected exactly one qubit"));
                }
                let q = parse_qubit(rest[0])?;
                circuit.push(Instruction::Gate(match head {
                    "h" => Gate::H(q),
                    "s" => Gate::S(q),
                    "x" => Gate::X(q),
                    "y" => Gate::Y(q),
                    _ => Gate::Z(q),
                }));
            }
            "cnot" => {
                if rest.len() != 2 {
                    return Err(err(line_no, 1, "expected control and target"));
                }
                let c = parse_qubit(rest[0])?;
                let t = parse_qubit(rest[1])?;
                if c == t {
                    return Err(err(line_no, col_of(rest[1]), "control equals target"));
                }
                circuit.push(Instruction::Gate(Gate::Cnot(c, t)));
            }
            "noise" => {
                if rest.len() < 2 {
                    return Err(err(line_no, 1, "expected `noise name(params) qubits…`"));
                }
                let spec = rest[0];
                let open = spec
                    .find('(')
                    .ok_or_else(|| err(line_no, col_of(spec), "expected `(` in channel spec"))?;
                if !spec.ends_with(')') {
                    return Err(err(line_no, col_of(spec), "expected `)` in channel spec"));
                }
                let name = &spec[..open];
                if name.is_empty() {
                    return Err(err(line_no, col_of(spec), "missing channel name"));
                }
                let inner = &spec[open + 1..spec.len() - 1];
                let params: Vec<f64> = if inner.trim().is_empty() {
                    Vec::new()
                } else {
                    inner
                        .split(',')
                        .map(|t| {
                            t.trim()
                                .parse()
                                .map_err(|_| err(line_no, col_of(spec), "bad channel parameter"))
                        })
                        .collect::<Result<_>>()?
                };
                let qubits = rest[1..]
                    .iter()
                    .map(|t| parse_qubit(t))
                    .collect::<Result<Vec<_>>>()?;
                circuit.push(Instruction::Noise {
                    name: name.to_string(),
                    params,
                    qubits,
                });
            }
            "measure_pauli" => {
                if rest.len() != 3 || rest[1] != "->" {
                    return Err(err(line_no, 1, "expected `measure_pauli PAULI -> BIT`"));
                }
                let observable = parse_pauli(rest[0])?;
                let cbit: usize = rest[2]
                    .parse()
                    .map_err(|_| err(line_no, col_of(rest[2]), "expected classical bit"))?;
                if cbits.contains(&cbit) {
                    return Err(err(line_no, col_of(rest[2]), "classical bit reused"));
                }
                cbits.push(cbit);
                circuit.push(Instruction::MeasurePauli { observable, cbit });
            }
            "reset_pauli" => {
                if rest.len() != 1 {
                    return Err(err(line_no, 1, "expected `reset_pauli PAULI`"));
                }
                let target = parse_pauli(rest[0])?;
                if target.is_identity_unsigned() {
                    return Err(err(line_no, col_of(rest[0]), "cannot reset the identity"));
                }
                circuit.push(Instruction::ResetPauli { target });
            }
            "mr" => {
                if rest.len() != 3 || rest[1] != "->" {
                    return Err(err(line_no, 1, "expected `mr QUBIT -> BIT`"));
                }
                let qubit = parse_qubit(rest[0])?;
                let cbit: usize = rest[2]
                    .parse()
                    .map_err(|_| err(line_no, col_of(rest[2]), "expected classical bit"))?;
                if cbits.contains(&cbit) {
                    return Err(err(line_no, col_of(rest[2]), "classical bit reused"));
                }
                cbits.push(cbit);
                circuit.push(Instruction::MeasureReset { qubit, cbit });
            }
            other => {
                return Err(err(
                    line_no,
                    col_of(other),
                    &format!("unknown instruction {other:?}"),
                ));
            }
        }
    }
    // Trailing empty step from a final barrier is cosmetic.
    if circuit.steps.last().map(|s| s.is_empty()).unwrap_or(false) {
        circuit.steps.pop();
    }
    circuit.validate()?;
    Ok(circuit)
}

/// Noise channel reference plus the boundary placement rule: after every
/// timestep, apply the channel to each qubit the step touched.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub name: String,
    pub params: Vec<f64>,
}

impl NoiseModel {
    pub fn depolarizing(p: f64) -> Self {
        NoiseModel {
            name: "depolarizing".into(),
            params: vec![p],
        }
    }

    pub fn amplitude_damping(gamma: f64) -> Self {
        NoiseModel {
            name: "amplitude_damping".into(),
            params: vec![gamma],
        }
    }

    pub fn rotation_z(theta: f64) -> Self {
        NoiseModel {
            name: "rotation_z".into(),
            params: vec![theta],
        }
    }
}

/// Insert one noise instruction per touched qubit after every timestep.
/// Existing noise instructions do not count as touching a qubit, so
/// re-insertion does not stack noise on noise.
pub fn insert_noise(c: &Circuit, model: &NoiseModel) -> Circuit {
    let mut steps = Vec::with_capacity(c.steps.len() * 2);
    for step in &c.steps {
        let mut touched: Vec<usize> = Vec::new();
        for instr in step {
            if !matches!(instr, Instruction::Noise { .. }) {
                for q in instr.qubits() {
                    if !touched.contains(&q) {
                        touched.push(q);
                    }
                }
            }
        }
        steps.push(step.clone());
        if !touched.is_empty() {
            touched.sort_unstable();
            steps.push(
                touched
                    .into_iter()
                    .map(|q| Instruction::Noise {
                        name: model.name.clone(),
                        params: model.params.clone(),
                        qubits: vec![q],
                    })
                    .collect(),
            );
        }
    }
    Circuit { n: c.n, steps }
}

/// Named channel constructors for noise instructions, extensible with
/// custom decompositions.
#[derive(Debug, Clone, Default)]
pub struct NoiseRegistry {
    custom: HashMap<String, StabilizerDecomposition>,
}

impl NoiseRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, d: StabilizerDecomposition) {
        self.custom.insert(name.into(), d);
    }

    pub fn resolve(&self, name: &str, params: &[f64]) -> Result<StabilizerDecomposition> {
        if let Some(d) = self.custom.get(name) {
            if !params.is_empty() {
                return Err(Error::UnknownChannel(format!(
                    "{name} is a registered decomposition and takes no parameters"
                )));
            }
            return Ok(d.clone());
        }
        let one = |f: &dyn Fn(f64) -> Result<StabilizerDecomposition>|
         -> Result<StabilizerDecomposition> {
            if params.len() != 1 {
                return Err(Error::UnknownChannel(format!(
                    "{name} takes exactly one parameter"
                )));
            }
            f(params[0])
        };
        match name {
            "depolarizing" => one(&crate::channels::make_depolarizing),
            "amplitude_damping" => one(&crate::channels::make_amplitude_damping),
            "rotation_z" => one(&|t| Ok(crate::channels::make_rotation_z(t))),
            "rotation_z_positive" => one(&crate::channels::make_rotation_z_positive_approx),
            "identity" => {
                if !params.is_empty() {
                    return Err(Error::UnknownChannel("identity takes no parameters".into()));
                }
                Ok(StabilizerDecomposition::single(
                    StabilizerChannelTerm::identity(1),
                ))
            }
            _ => Err(Error::UnknownChannel(name.to_string())),
        }
    }
}

fn gate_channel(g: &Gate) -> ChannelApplication {
    let (action, qubits) = match *g {
        Gate::H(q) => (CliffordAction::h(), vec![q]),
        Gate::S(q) => (CliffordAction::s(), vec![q]),
        Gate::X(q) => (CliffordAction::x(), vec![q]),
        Gate::Y(q) => (CliffordAction::y(), vec![q]),
        Gate::Z(q) => (CliffordAction::z(), vec![q]),
        Gate::Cnot(c, t) => (CliffordAction::cnot(), vec![c, t]),
    };
    ChannelApplication {
        decomposition: StabilizerDecomposition::single(StabilizerChannelTerm::Clifford(action)),
        qubits,
    }
}

/// Restrict a Pauli to its support as a local operator (sign preserved).
fn localized(p: &PauliString) -> (PauliString, Vec<usize>) {
    let qs = support(p);
    let mut local = PauliString::identity(qs.len());
    for (i, &q) in qs.iter().enumerate() {
        local.set(i, p.get(q));
    }
    local.set_phase(p.phase());
    (local, qs)
}

/// Compile a circuit into a channel-sequence sampling plan starting from
/// |0…0⟩. Gates become single-term Clifford channels, noise instructions
/// resolve through the registry, `mr`/`reset_pauli` become reset channels,
/// and an unread `measure_pauli` becomes the dephasing mixture
/// (1/2)(1 + P-conjugation). Observables start empty.
pub fn compile(c: &Circuit, registry: &NoiseRegistry) -> Result<SimulationPlan> {
    let mut plan = SimulationPlan::from_zero_state(c.n);
    for step in &c.steps {
        for instr in step {
            match instr {
                Instruction::Gate(g) => plan.channels.push(gate_channel(g)),
                Instruction::Noise {
                    name,
                    params,
                    qubits,
                } => {
                    let d = registry.resolve(name, params)?;
                    if d.num_qubits() == qubits.len() {
                        plan.channels.push(ChannelApplication {
                            decomposition: d,
                            qubits: qubits.clone(),
                        });
                    } else if d.num_qubits() == 1 {
                        for &q in qubits {
                            plan.channels.push(ChannelApplication {
                                decomposition: d.clone(),
                                qubits: vec![q],
                            });
                        }
                    } else {
                        return Err(Error::DimensionMismatch {
                            expected: qubits.len(),
                            got: d.num_qubits(),
                        });
                    }
                }
                Instruction::MeasurePauli { observable, .. } => {
                    let (local, qs) = localized(observable);
                    let dephase = StabilizerDecomposition::new(
                        qs.len(),
                        vec![
                            (0.5, StabilizerChannelTerm::identity(qs.len())),
                            (
                                0.5,
                                StabilizerChannelTerm::Clifford(CliffordAction::from_pauli(
                                    &local.unsigned(),
                                )),
                            ),
                        ],
                    )?;
                    plan.channels.push(ChannelApplication {
                        decomposition: dephase,
                        qubits: qs,
                    });
                }
                Instruction::ResetPauli { target } => {
                    let (local, qs) = localized(target);
                    plan.channels.push(ChannelApplication {
                        decomposition: StabilizerDecomposition::single(
                            StabilizerChannelTerm::PauliReset(local),
                        ),
                        qubits: qs,
                    });
                }
                Instruction::MeasureReset { qubit, .. } => {
                    plan.channels.push(ChannelApplication {
                        decomposition: StabilizerDecomposition::single(
                            StabilizerChannelTerm::PauliReset(PauliString::single(
                                1,
                                0,
                                Pauli::Z,
                            )),
                        ),
                        qubits: vec![*qubit],
                    });
                }
            }
        }
    }
    Ok(plan)
}

/// Feedback handler: receives the classical bits recorded so far after each
/// timestep containing measurements, and may inject instructions to run
/// immediately (Cliffords, measurements, resets; injected noise is allowed
/// and multiplies the shot weight).
pub type FeedbackHandler<'a> = dyn FnMut(&[bool]) -> Option<Vec<Instruction>> + 'a;

enum PreparedInstruction {
    Gate(Gate),
    Channel(PreparedChannel),
    MeasurePauli {
        observable: PauliString,
        cbit: usize,
    },
    ResetPauli {
        target: PauliString,
    },
    MeasureReset {
        measure: PauliString,
        flip: PauliString,
        cbit: usize,
    },
}

/// Execution-ready circuit: noise resolved against a registry and channels
/// compiled into sampling form.
pub struct PreparedCircuit {
    n: usize,
    steps: Vec<Vec<PreparedInstruction>>,
    num_cbits: usize,
    one_norm_product: f64,
}

impl PreparedCircuit {
    pub fn new(c: &Circuit, registry: &NoiseRegistry) -> Result<Self> {
        let mut steps = Vec::with_capacity(c.steps.len());
        let mut g_total = 1.0f64;
        for step in &c.steps {
            let mut prepared = Vec::with_capacity(step.len());
            for instr in step {
                for p in prepare_instruction(instr, c.n, registry)? {
                    if let PreparedInstruction::Channel(ch) = &p {
                        g_total *= ch.one_norm();
                        // Single-identity-term channels (zero-strength
                        // noise) touch neither the state nor the stream.
                        if ch.is_trivial() {
                            continue;
                        }
                    }
                    prepared.push(p);
                }
            }
            steps.push(prepared);
        }
        Ok(PreparedCircuit {
            n: c.n,
            steps,
            num_cbits: c.num_classical_bits(),
            one_norm_product: g_total,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// Π g over all noise channels in the circuit.
    pub fn one_norm_product(&self) -> f64 {
        self.one_norm_product
    }

    pub fn num_classical_bits(&self) -> usize {
        self.num_cbits
    }
}

fn prepare_instruction(
    instr: &Instruction,
    n: usize,
    registry: &NoiseRegistry,
) -> Result<Vec<PreparedInstruction>> {
    Ok(match instr {
        Instruction::Gate(g) => {
            for q in g.qubits() {
                if q >= n {
                    return Err(Error::QubitOutOfRange { qubit: q, n });
                }
            }
            vec![PreparedInstruction::Gate(*g)]
        }
        Instruction::Noise {
            name,
            params,
            qubits,
        } => {
            let d = registry.resolve(name, params)?;
            if d.num_qubits() == qubits.len() {
                vec![PreparedInstruction::Channel(PreparedChannel::new(
                    &d, qubits, n,
                )?)]
            } else if d.num_qubits() == 1 {
                qubits
                    .iter()
                    .map(|&q| {
                        Ok(PreparedInstruction::Channel(PreparedChannel::new(
                            &d,
                            &[q],
                            n,
                        )?))
                    })
                    .collect::<Result<Vec<_>>>()?
            } else {
                return Err(Error::DimensionMismatch {
                    expected: qubits.len(),
                    got: d.num_qubits(),
                });
            }
        }
        Instruction::MeasurePauli { observable, cbit } => {
            if observable.num_qubits() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: observable.num_qubits(),
                });
            }
            vec![PreparedInstruction::MeasurePauli {
                observable: observable.clone(),
                cbit: *cbit,
            }]
        }
        Instruction::ResetPauli { target } => {
            if target.num_qubits() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: target.num_qubits(),
                });
            }
            vec![PreparedInstruction::ResetPauli {
                target: target.clone(),
            }]
        }
        Instruction::MeasureReset { qubit, cbit } => {
            if *qubit >= n {
                return Err(Error::QubitOutOfRange { qubit: *qubit, n });
            }
            vec![PreparedInstruction::MeasureReset {
                measure: PauliString::single(n, *qubit, Pauli::Z),
                flip: PauliString::single(n, *qubit, Pauli::X),
                cbit: *cbit,
            }]
        }
    })
}

/// Run a prepared circuit on a tableau, sampling noise terms and invoking
/// the feedback handler after each timestep that recorded a measurement.
/// Returns the classical record and the signed shot weight.
pub fn execute_dynamic<R: Rng + ?Sized>(
    circuit: &PreparedCircuit,
    t: &mut Tableau,
    rng: &mut R,
    registry: &NoiseRegistry,
    mut handler: Option<&mut FeedbackHandler<'_>>,
) -> Result<(Vec<bool>, f64)> {
    if t.num_qubits() != circuit.n {
        return Err(Error::DimensionMismatch {
            expected: circuit.n,
            got: t.num_qubits(),
        });
    }
    let mut bits = vec![false; circuit.num_cbits];
    let mut sign = 1.0f64;
    let mut g_injected = 1.0f64;
    for step in &circuit.steps {
        let mut measured = false;
        for instr in step {
            measured |= execute_prepared(instr, t, rng, &mut bits, &mut sign)?;
        }
        if measured {
            if let Some(h) = handler.as_deref_mut() {
                if let Some(injected) = h(&bits) {
                    for instr in &injected {
                        for p in prepare_instruction(instr, circuit.n, registry)? {
                            if let PreparedInstruction::Channel(ch) = &p {
                                g_injected *= ch.one_norm();
                            }
                            execute_prepared(&p, t, rng, &mut bits, &mut sign)?;
                        }
                    }
                }
            }
        }
    }
    Ok((bits, sign * circuit.one_norm_product * g_injected))
}

fn execute_prepared<R: Rng + ?Sized>(
    instr: &PreparedInstruction,
    t: &mut Tableau,
    rng: &mut R,
    bits: &mut Vec<bool>,
    sign: &mut f64,
) -> Result<bool> {
    match instr {
        PreparedInstruction::Gate(g) => {
            match *g {
                Gate::H(q) => t.apply_h(q)?,
                Gate::S(q) => t.apply_s(q)?,
                Gate::X(q) => t.apply_x(q)?,
                Gate::Y(q) => t.apply_y(q)?,
                Gate::Z(q) => t.apply_z(q)?,
                Gate::Cnot(c, q) => t.apply_cnot(c, q)?,
            }
            Ok(false)
        }
        PreparedInstruction::Channel(ch) => {
            if ch.apply_sampled(t, rng)? {
                *sign = -*sign;
            }
            Ok(false)
        }
        PreparedInstruction::MeasurePauli { observable, cbit } => {
            let rec = t.measure_pauli(observable, rng)?;
            record_bit(bits, *cbit, rec.outcome == -1);
            Ok(true)
        }
        PreparedInstruction::ResetPauli { target } => {
            t.pauli_reset(target, rng)?;
            Ok(false)
        }
        PreparedInstruction::MeasureReset {
            measure,
            flip,
            cbit,
        } => {
            let rec = t.measure_pauli(measure, rng)?;
            if rec.outcome == -1 {
                t.apply_pauli(flip)?;
            }
            record_bit(bits, *cbit, rec.outcome == -1);
            Ok(true)
        }
    }
}

fn record_bit(bits: &mut Vec<bool>, cbit: usize, value: bool) {
    if cbit >= bits.len() {
        bits.resize(cbit + 1, false);
    }
    bits[cbit] = value;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{estimate, stream_for_shot};
    use approx::assert_abs_diff_eq;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn parse_minimal() {
        let c = parse("qubits 1\nh 0\n").unwrap();
        assert_eq!(c.num_qubits(), 1);
        assert_eq!(c.steps().len(), 1);
        assert_eq!(c.steps()[0], vec![Instruction::Gate(Gate::H(0))]);
    }

    #[test]
    fn parse_gate_then_noise() {
        let c = parse("qubits 2\ncnot 0 1\nnoise depolarizing(0.001) 0 1\n").unwrap();
        assert_eq!(c.steps().len(), 2);
        assert!(matches!(c.steps()[1][0], Instruction::Noise { .. }));
    }

    #[test]
    fn parse_errors_carry_position() {
        let e = parse("qubits 2\nh 5\n").unwrap_err();
        match e {
            Error::CircuitParse { line, msg, .. } => {
                assert_eq!(line, 2);
                assert!(msg.contains("not declared"));
            }
            other => panic!("unexpected error {other}"),
        }
        assert!(parse("qubits 2\nfrobnicate 0\n").is_err());
        assert!(parse("h 0\n").is_err());
        assert!(parse("qubits 2\nmeasure_pauli +Z -> 0\n").is_err());
        assert!(parse("qubits 1\nmeasure_pauli +Z -> 0\nmeasure_pauli +X -> 0\n").is_err());
    }

    #[test]
    fn fusion_and_barriers() {
        // Disjoint gates fuse; overlapping ones split; barrier forces split.
        let c = parse("qubits 3\nh 0\nh 1\nh 0\n").unwrap();
        assert_eq!(c.steps().len(), 2);
        let c = parse("qubits 3\nh 0\nbarrier\nh 1\n").unwrap();
        assert_eq!(c.steps().len(), 2);
        assert_eq!(c.steps()[0].len(), 1);
    }

    #[test]
    fn render_parse_round_trip() {
        let text = "qubits 3\nh 0\ns 1\nbarrier\ncnot 0 2\nnoise depolarizing(0.001) 0 2\nmeasure_pauli +ZZI -> 0\nmr 1 -> 1\nreset_pauli -IZI\n";
        let c = parse(text).unwrap();
        let back = parse(&c.render()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn round_trip_random_circuits() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2024);
        for _ in 0..50 {
            let n = 1 + rng.random::<u32>() as usize % 4;
            let mut c = Circuit::new(n);
            let mut cbit = 0;
            for _ in 0..15 {
                match rng.random::<u32>() % 6 {
                    0 => c.push(Instruction::Gate(Gate::H(rng.random::<u32>() as usize % n))),
                    1 => c.push(Instruction::Gate(Gate::S(rng.random::<u32>() as usize % n))),
                    2 if n > 1 => {
                        let a = rng.random::<u32>() as usize % n;
                        let b = (a + 1 + rng.random::<u32>() as usize % (n - 1)) % n;
                        c.push(Instruction::Gate(Gate::Cnot(a, b)));
                    }
                    3 => c.push(Instruction::Noise {
                        name: "depolarizing".into(),
                        params: vec![rng.random::<f64>() * 0.7],
                        qubits: vec![rng.random::<u32>() as usize % n],
                    }),
                    4 => {
                        c.push(Instruction::MeasureReset {
                            qubit: rng.random::<u32>() as usize % n,
                            cbit,
                        });
                        cbit += 1;
                    }
                    _ => c.barrier(),
                }
            }
            if c.steps.last().map(|s| s.is_empty()).unwrap_or(false) {
                c.steps.pop();
            }
            let back = parse(&c.render()).unwrap();
            assert_eq!(c, back, "render:\n{}", c.render());
        }
    }

    #[test]
    fn insert_noise_examples() {
        let c = parse("qubits 1\nh 0\n").unwrap();
        let noisy = insert_noise(&c, &NoiseModel::depolarizing(0.01));
        assert_eq!(noisy.steps().len(), 2);
        assert_eq!(
            noisy.steps()[1],
            vec![Instruction::Noise {
                name: "depolarizing".into(),
                params: vec![0.01],
                qubits: vec![0],
            }]
        );

        let empty = Circuit::new(3);
        assert_eq!(insert_noise(&empty, &NoiseModel::depolarizing(0.01)), empty);

        // Idle qubits stay untouched.
        let c = parse("qubits 3\ncnot 0 1\n").unwrap();
        let noisy = insert_noise(&c, &NoiseModel::amplitude_damping(0.1));
        assert_eq!(noisy.steps()[1].len(), 2);
    }

    #[test]
    fn compile_one_norms() {
        let registry = NoiseRegistry::new();
        let c = parse("qubits 2\nh 0\ncnot 0 1\n").unwrap();
        let plan = compile(&c, &registry).unwrap();
        let prepared = crate::sampler::PreparedPlan::new(&plan).unwrap();
        assert_eq!(prepared.one_norm_product(), 1.0);

        let mut registry = NoiseRegistry::new();
        registry.insert("t", crate::channels::make_t_gate());
        let c = parse("qubits 1\nnoise t() 0\n").unwrap();
        let plan = compile(&c, &registry).unwrap();
        let prepared = crate::sampler::PreparedPlan::new(&plan).unwrap();
        assert_abs_diff_eq!(
            prepared.one_norm_product(),
            std::f64::consts::SQRT_2,
            epsilon = 1e-12
        );

        // 50 small rotations multiply their 1-norms.
        let theta = std::f64::consts::PI / 100.0;
        let mut text = String::from("qubits 1\n");
        for _ in 0..50 {
            text.push_str(&format!("noise rotation_z({theta}) 0\nbarrier\n"));
        }
        let plan = compile(&parse(&text).unwrap(), &NoiseRegistry::new()).unwrap();
        let prepared = crate::sampler::PreparedPlan::new(&plan).unwrap();
        let g = crate::channels::make_rotation_z(theta).one_norm();
        assert_abs_diff_eq!(prepared.one_norm_product(), g.powi(50), epsilon = 1e-9);
    }

    #[test]
    fn zero_strength_insertion_matches_bare_circuit() {
        let registry = NoiseRegistry::new();
        let c = parse("qubits 2\nh 0\ncnot 0 1\nmr 0 -> 0\n").unwrap();
        let noisy = insert_noise(&c, &NoiseModel::depolarizing(0.0));
        let mut plan_a = compile(&c, &registry).unwrap();
        let mut plan_b = compile(&noisy, &registry).unwrap();
        plan_a.observables.push(vec![ps("+ZI"), ps("+IZ")]);
        plan_b.observables.push(vec![ps("+ZI"), ps("+IZ")]);
        let a = estimate(&plan_a, 4000, 5).unwrap();
        let b = estimate(&plan_b, 4000, 5).unwrap();
        assert_eq!(a[0].mean.to_bits(), b[0].mean.to_bits());
        assert_eq!(
            a[0].sample_variance.to_bits(),
            b[0].sample_variance.to_bits()
        );
    }

    #[test]
    fn execute_matches_compile_for_feedback_free_circuits() {
        // Same seed → same weight and same final state on every shot.
        let registry = NoiseRegistry::new();
        let text = "qubits 2\nh 0\ncnot 0 1\nnoise amplitude_damping(0.2) 0 1\nmr 0 -> 0\n";
        let c = parse(text).unwrap();
        let plan = {
            let mut p = compile(&c, &registry).unwrap();
            p.observables.push(vec![ps("+ZI"), ps("+IZ")]);
            p
        };
        let prepared_plan = crate::sampler::PreparedPlan::new(&plan).unwrap();
        let prepared_circ = PreparedCircuit::new(&c, &registry).unwrap();
        for shot in 0..200 {
            let mut rng_a = stream_for_shot(42, shot);
            let vals = crate::sampler::run_shot(&prepared_plan, &mut rng_a).unwrap();

            let mut rng_b = stream_for_shot(42, shot);
            let mut t = Tableau::new_zero_state(2);
            let (_bits, w) =
                execute_dynamic(&prepared_circ, &mut t, &mut rng_b, &registry, None).unwrap();
            let f = t.projection_probability(&[ps("+ZI"), ps("+IZ")]).unwrap();
            assert_eq!(vals[0].to_bits(), (w * f).to_bits(), "shot {shot}");
        }
    }

    #[test]
    fn feedback_reset_by_measurement() {
        // Measure Z; apply X when the outcome was −1: always ends in |0⟩.
        let registry = NoiseRegistry::new();
        let c = parse("qubits 1\nh 0\nmeasure_pauli +Z -> 0\n").unwrap();
        let prepared = PreparedCircuit::new(&c, &registry).unwrap();
        for shot in 0..50 {
            let mut rng = stream_for_shot(9, shot);
            let mut t = Tableau::new_zero_state(1);
            let mut handler = |bits: &[bool]| -> Option<Vec<Instruction>> {
                bits[0].then(|| vec![Instruction::Gate(Gate::X(0))])
            };
            let (_, w) = execute_dynamic(
                &prepared,
                &mut t,
                &mut rng,
                &registry,
                Some(&mut handler),
            )
            .unwrap();
            assert_eq!(w, 1.0);
            assert_eq!(t.projection_probability(&[ps("+Z")]).unwrap(), 1.0);
        }
    }

    #[test]
    fn unknown_channel_is_an_error() {
        let registry = NoiseRegistry::new();
        let c = parse("qubits 1\nnoise nosuch(0.1) 0\n").unwrap();
        assert!(compile(&c, &registry).is_err());
        assert!(PreparedCircuit::new(&c, &registry).is_err());
    }
}
