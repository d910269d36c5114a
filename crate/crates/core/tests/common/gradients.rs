//! Central finite-difference gradient oracles.

use beatstream::framing::{BeatFrame, FrameMethod, FrameSequence, FRAME_LEN, SEQUENCE_LEN};
use beatstream::models::{
    Classifier, Example, IdentifiedSpec, IdentifiedStream, TemporalSpec, TemporalStream,
};
use beatstream::nn::{lstm_step, Graph, LstmVars, Mode, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Input = (Vec<f64>, Vec<usize>);

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Relative error `|a - b| / (|a| + |b|)` over whole gradient vectors.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na + nb == 0.0 {
        0.0
    } else {
        diff / (na + nb)
    }
}

/// Builds `build(inputs)` then reduces the output to a scalar with fixed
/// random weights, so every output element contributes.
fn scalar_loss(
    g: &mut Graph<f64>,
    inputs: &[Input],
    trainable: bool,
    weight_seed: u64,
    build: &dyn Fn(&mut Graph<f64>, &[Var]) -> Var,
) -> (Var, Vec<Var>) {
    let vars: Vec<Var> = inputs
        .iter()
        .map(|(v, s)| g.leaf(v.clone(), s, trainable).unwrap())
        .collect();
    let y = build(g, &vars);
    if g.value(y).len() == 1 {
        return (y, vars);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(weight_seed);
    let r = random_vec(&mut rng, g.value(y).len(), 1.0);
    let shape = g.shape(y).to_vec();
    let r = g.constant(r, &shape).unwrap();
    let prod = g.mul(y, r).unwrap();
    (g.sum(prod), vars)
}

/// Compares analytic gradients against central differences with step `h`
/// and returns the worst relative error over all inputs.
pub fn gradient_check(
    inputs: &[Input],
    h: f64,
    build: &dyn Fn(&mut Graph<f64>, &[Var]) -> Var,
) -> f64 {
    let weight_seed = 0xfd;
    let mut g = Graph::new();
    let (loss, vars) = scalar_loss(&mut g, inputs, true, weight_seed, build);
    g.backward(loss).unwrap();
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, (x, _))| g.grad(v).map(<[f64]>::to_vec).unwrap_or(vec![0.0; x.len()]))
        .collect();

    let eval = |perturbed: &[Input]| {
        let mut g = Graph::new();
        let (loss, _) = scalar_loss(&mut g, perturbed, false, weight_seed, build);
        g.value(loss)[0]
    };
    let mut worst = 0.0f64;
    for (k, (x, _)) in inputs.iter().enumerate() {
        let mut work = inputs.to_vec();
        let numeric: Vec<f64> = (0..x.len())
            .map(|j| {
                let orig = work[k].0[j];
                work[k].0[j] = orig + h;
                let plus = eval(&work);
                work[k].0[j] = orig - h;
                let minus = eval(&work);
                work[k].0[j] = orig;
                (plus - minus) / (2.0 * h)
            })
            .collect();
        worst = worst.max(rel_err(&analytic[k], &numeric));
    }
    worst
}

pub const OP_STEP: f64 = 1e-5;

fn seeded_inputs(seed: u64, shapes: &[&[usize]]) -> Vec<Input> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shapes
        .iter()
        .map(|s| (random_vec(&mut rng, s.iter().product(), 1.0), s.to_vec()))
        .collect()
}

type Builder = Box<dyn Fn(&mut Graph<f64>, &[Var]) -> Var>;

/// Every differentiable operation with input shapes for its check.
pub fn op_cases() -> Vec<(&'static str, Vec<Vec<usize>>, Builder)> {
    let v = |s: &[&[usize]]| s.iter().map(|x| x.to_vec()).collect::<Vec<_>>();
    let (hid, inp) = (3usize, 4usize);
    let mut cases: Vec<(&'static str, Vec<Vec<usize>>, Builder)> = vec![
        ("conv1d", v(&[&[2, 13], &[3, 2, 5], &[3]]), Box::new(|g, x| g.conv1d(x[0], x[1], x[2]).unwrap())),
        ("avgpool1d", v(&[&[3, 12]]), Box::new(|g, x| g.avgpool1d(x[0]).unwrap())),
        ("relu", v(&[&[40]]), Box::new(|g, x| g.relu(x[0]))),
        ("sigmoid", v(&[&[20]]), Box::new(|g, x| g.sigmoid(x[0]))),
        ("tanh", v(&[&[20]]), Box::new(|g, x| g.tanh(x[0]))),
        (
            "fully_connected",
            v(&[&[7], &[4, 7], &[4]]),
            Box::new(|g, x| g.fully_connected(x[0], x[1], x[2]).unwrap()),
        ),
        (
            "dropout",
            v(&[&[30]]),
            Box::new(|g, x| {
                let mut rng = ChaCha8Rng::seed_from_u64(99);
                g.dropout(x[0], 0.5, Mode::Train, &mut rng).unwrap()
            }),
        ),
        ("mul", v(&[&[6], &[6]]), Box::new(|g, x| g.mul(x[0], x[1]).unwrap())),
        ("add", v(&[&[6], &[6]]), Box::new(|g, x| g.add(x[0], x[1]).unwrap())),
        ("concat", v(&[&[3], &[5]]), Box::new(|g, x| g.concat(&[x[0], x[1]]).unwrap())),
        ("flatten", v(&[&[2, 4]]), Box::new(|g, x| g.flatten(x[0]).unwrap())),
        ("sum", v(&[&[5]]), Box::new(|g, x| g.sum(x[0]))),
    ];
    for target in 0..4 {
        cases.push((
            "softmax_cross_entropy",
            v(&[&[4]]),
            Box::new(move |g, x| g.softmax_cross_entropy(x[0], target).unwrap().0),
        ));
    }
    let w = vec![hid, hid + inp];
    let mut lstm_shapes = vec![w.clone(), w.clone(), w.clone(), w];
    lstm_shapes.extend(std::iter::repeat_n(vec![hid], 4));
    lstm_shapes.extend(std::iter::repeat_n(vec![inp], 3));
    cases.push((
        "lstm_step x3",
        lstm_shapes,
        Box::new(move |g, v| {
            let p = LstmVars {
                w_f: v[0],
                w_i: v[1],
                w_c: v[2],
                w_o: v[3],
                b_f: v[4],
                b_i: v[5],
                b_c: v[6],
                b_o: v[7],
            };
            let mut h = g.constant(vec![0.0; hid], &[hid]).unwrap();
            let mut c = h;
            for &xt in &v[8..11] {
                (h, c) = lstm_step(g, &p, xt, h, c).unwrap();
            }
            h
        }),
    ));
    cases
}

/// Worst relative error of each operation for one seed.
pub fn op_errors(seed: u64) -> Vec<(&'static str, f64)> {
    op_cases()
        .into_iter()
        .map(|(name, shapes, build)| {
            let refs: Vec<&[usize]> = shapes.iter().map(Vec::as_slice).collect();
            (name, gradient_check(&seeded_inputs(seed, &refs), OP_STEP, &*build))
        })
        .collect()
}

/// Summed cross-entropy over `data` in one graph, plus parameter gradients
/// when requested. Dropout masks are fixed per example.
fn network_loss<M: Classifier<f64>>(
    model: &M,
    data: &[Example<M::Input>],
    with_grads: bool,
) -> (f64, Vec<Vec<f64>>) {
    let mut g = Graph::new();
    let vars = model.params().bind(&mut g, with_grads);
    let mut total: Option<Var> = None;
    for (k, ex) in data.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + k as u64);
        let (logits, _) = model.build(&mut g, &vars, &ex.input, Mode::Train, &mut rng).unwrap();
        let (l, _) = g.softmax_cross_entropy(logits, ex.label).unwrap();
        total = Some(match total {
            None => l,
            Some(t) => g.add(t, l).unwrap(),
        });
    }
    let loss = total.expect("non-empty data");
    let value = g.value(loss)[0];
    if !with_grads {
        return (value, Vec::new());
    }
    g.backward(loss).unwrap();
    (value, model.params().collect_grads(&g, &vars))
}

/// Checks `per_tensor` randomly chosen coordinates of every parameter
/// tensor against central differences; returns the relative error over all
/// checked coordinates.
pub fn network_check<M: Classifier<f64> + Clone>(
    model: &M,
    data: &[Example<M::Input>],
    per_tensor: usize,
    h: f64,
    seed: u64,
) -> f64 {
    let (_, grads) = network_loss(model, data, true);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let (mut analytic, mut numeric) = (Vec::new(), Vec::new());
    let mut work = model.clone();
    for (t, grad) in grads.iter().enumerate() {
        for _ in 0..per_tensor {
            let j = rng.random_range(0..grad.len());
            let orig = work.params().iter().nth(t).unwrap().data[j];
            let mut at = |v: f64| {
                work.params_mut().iter_mut().nth(t).unwrap().data[j] = v;
                network_loss(&work, data, false).0
            };
            let plus = at(orig + h);
            let minus = at(orig - h);
            at(orig);
            analytic.push(grad[j]);
            numeric.push((plus - minus) / (2.0 * h));
        }
    }
    rel_err(&analytic, &numeric)
}

fn randomize<M: Classifier<f64>>(model: &mut M, rng: &mut ChaCha8Rng, scale: f64) {
    for p in model.params_mut().iter_mut() {
        let fan_in: usize = p.shape[1..].iter().product::<usize>().max(1);
        let bound = scale * (3.0 / fan_in as f64).sqrt();
        p.data.iter_mut().for_each(|v| *v = rng.random_range(-bound..bound));
    }
}

fn random_frame(rng: &mut ChaCha8Rng, label: usize) -> BeatFrame<f64> {
    let mut f = BeatFrame::zeros("g", label);
    f.samples = random_vec(rng, FRAME_LEN, 1.5);
    f
}

/// Full beat CNN on a 2-class, 20-example toy set.
pub fn identified_network_error(seed: u64, per_tensor: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = IdentifiedStream::<f64>::zeroed(IdentifiedSpec::new(2)).unwrap();
    // He scale keeps pre-activations O(1), away from the ReLU kinks.
    randomize(&mut model, &mut rng, 2.0f64.sqrt());
    let data: Vec<_> = (0..20)
        .map(|i| Example { input: random_frame(&mut rng, i % 2), label: i % 2 })
        .collect();
    network_check(&model, &data, per_tensor, 1e-5, seed)
}

/// Full LSTM stream on a 2-class, 20-sequence toy set.
pub fn temporal_network_error(seed: u64, per_tensor: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = TemporalStream::<f64>::zeroed(TemporalSpec::new(2)).unwrap();
    randomize(&mut model, &mut rng, 1.0);
    let data: Vec<_> = (0..20)
        .map(|i| {
            let frames = (0..SEQUENCE_LEN).map(|_| random_frame(&mut rng, i % 2)).collect();
            let input = FrameSequence {
                frames,
                label: i % 2,
                method: FrameMethod::Chronological,
                real_frames: SEQUENCE_LEN,
            };
            Example { input, label: i % 2 }
        })
        .collect();
    network_check(&model, &data, per_tensor, 1e-5, seed)
}
