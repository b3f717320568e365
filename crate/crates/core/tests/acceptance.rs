//! Acceptance suite. Each test prints one `PASS`/`FAIL` line straight to
//! stdout (bypassing capture) and then asserts.

use std::io::Write;
use std::sync::atomic::AtomicBool;

use chrono::NaiveDate;
use groundcast::arima::{fit, one_step_predictions, ArimaOrder};
use groundcast::datagen::{
    block_bootstrap, dataset_digest, generate, gr4j_step, synthetic_climate, uh_ordinates,
    BootstrapSpec, ClimateSpec, GenerationKind, GenerationSpec, Gr4jParams, Gr4jState,
};
use groundcast::harness::{
    fit_experiment, lag_sensitivity, load_data, replicate_simulation_study, run_grid, write_csv,
    DataSource, ExperimentConfig, GridSpec, ModelKind, ReplicateStudy, StudySettings,
    LAG_STUDY_LAGS,
};
use groundcast::linalg::lstsq;
use groundcast::nnet::{
    loss_and_gradient, total_loss, Activation, LossKind, MlpParams, MlpSpec, Network, WindowedData,
};
use groundcast::recurrent::{
    lstm_cell_step, lstm_cell_step_with_gates, CellState, LstmLayer, LstmParams, LstmSpec,
    RnnParams, SimpleKind,
};
use groundcast::series::{calendar, Dataset, TimeSeries};
use groundcast::stats::pearson;
use groundcast::stochastic::simulate_arma;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "acceptance {criterion:>2} [{}] {name}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

// ---------------------------------------------------------------- 1

const GRAD_REL_TOL: f64 = 1e-4;
const GRAD_STEP: f64 = 1e-6;
/// Denominator floor so that near-zero components are compared absolutely.
const GRAD_FLOOR: f64 = 1e-6;

fn windowed(samples: usize, features: usize, window: usize, rng: &mut ChaCha8Rng) -> WindowedData {
    let rows = samples + window - 1;
    let x = Array2::from_shape_fn((rows, features), |_| rng.gen_range(-1.0..1.0));
    let y = (0..samples).map(|_| rng.gen_range(-1.0..1.0)).collect();
    WindowedData::new(x, y, window).unwrap()
}

/// Largest relative gap between the analytic gradient and central differences.
fn max_gradient_error<N: Network>(net: &N, data: &WindowedData, lambda: f64) -> f64 {
    let idx: Vec<usize> = (0..data.len()).collect();
    let (_, grad) = loss_and_gradient(net, data, &idx, LossKind::Mse, lambda);
    let analytic: Vec<f64> = grad
        .tensors()
        .iter()
        .flat_map(|(t, _)| t.iter().copied())
        .collect();
    let mut worst: f64 = 0.0;
    let mut k = 0;
    for t in 0..net.tensors().len() {
        for j in 0..net.tensors()[t].0.len() {
            let mut plus = net.clone();
            plus.tensors_mut()[t].0[j] += GRAD_STEP;
            let mut minus = net.clone();
            minus.tensors_mut()[t].0[j] -= GRAD_STEP;
            let fd = (total_loss(&plus, data, &idx, LossKind::Mse, lambda)
                - total_loss(&minus, data, &idx, LossKind::Mse, lambda))
                / (2.0 * GRAD_STEP);
            let scale = fd.abs().max(analytic[k].abs()).max(GRAD_FLOOR);
            worst = worst.max((fd - analytic[k]).abs() / scale);
            k += 1;
        }
    }
    worst
}

#[test]
fn criterion_01_gradients_match_finite_differences() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let acts = [Activation::Sigmoid, Activation::Tanh, Activation::Linear];
    let mut worst: f64 = 0.0;
    let mut instances = 0;
    for i in 0..40 {
        let p = rng.gen_range(1..4);
        let hidden = match i % 3 {
            0 => vec![],
            1 => vec![rng.gen_range(1..5)],
            _ => vec![rng.gen_range(1..4), rng.gen_range(1..4)],
        };
        let spec = MlpSpec::new(p, hidden, acts[i % 3]);
        let net = MlpParams::init(&spec, i as u64);
        let data = windowed(6, p, 1, &mut rng);
        worst = worst.max(max_gradient_error(&net, &data, 0.01));
        instances += 1;
    }
    for i in 0..30 {
        let p = rng.gen_range(1..3);
        let hidden = if i % 2 == 0 {
            vec![rng.gen_range(1..4)]
        } else {
            vec![rng.gen_range(1..3), rng.gen_range(1..3)]
        };
        let net = LstmParams::init(
            &LstmSpec {
                input_dim: p,
                hidden,
            },
            100 + i as u64,
        )
        .unwrap();
        let data = windowed(4, p, rng.gen_range(1..5), &mut rng);
        worst = worst.max(max_gradient_error(&net, &data, 0.01));
        instances += 1;
    }
    for i in 0..40 {
        let kind = if i % 2 == 0 {
            SimpleKind::Jordan
        } else {
            SimpleKind::Elman
        };
        let p = rng.gen_range(1..3);
        let net = RnnParams::init(kind, p, rng.gen_range(1..4), acts[i % 2], 200 + i as u64);
        let data = windowed(4, p, rng.gen_range(1..5), &mut rng);
        worst = worst.max(max_gradient_error(&net, &data, 0.01));
        instances += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst < GRAD_REL_TOL && instances >= 100 && secs < 60.0;
    report(
        1,
        "gradient correctness",
        pass,
        &format!("{instances} instances, max rel err {worst:.2e}, {secs:.1}s"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 2

const PHI_TOL: f64 = 0.05;
const BETA_TOL: f64 = 0.1;

#[test]
fn criterion_02_arima_recovers_ar1_and_regression() {
    let start = std::time::Instant::now();
    let n = 5000;
    let none = Array2::<f64>::zeros((n, 0));
    let order = ArimaOrder::new(1, 0, 0).unwrap();
    let mut phi_hits = 0;
    let mut beta_hits = 0;
    for seed in 0..20 {
        let y = simulate_arma(&[0.8], &[], 1.0, 500, n, seed);
        let m = fit(&y, none.view(), order).unwrap();
        if (m.phi[0] - 0.8).abs() < PHI_TOL {
            phi_hits += 1;
        }
        let eta = simulate_arma(&[0.5], &[], 1.0, 500, n, 1000 + seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y: Vec<f64> = x.iter().zip(&eta).map(|(x, e)| 2.0 * x + e).collect();
        let xm = Array2::from_shape_vec((n, 1), x).unwrap();
        let m = fit(&y, xm.view(), order).unwrap();
        if (m.beta[0] - 2.0).abs() < BETA_TOL {
            beta_hits += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = phi_hits >= 18 && beta_hits == 20 && secs < 120.0;
    report(2, "ARIMA recovery", pass, &format!("phi within {PHI_TOL} in {phi_hits}/20, beta within {BETA_TOL} in {beta_hits}/20, {secs:.1}s"));
    assert!(pass);
}

// ---------------------------------------------------------------- 3

const EQUIV_BAND: (f64, f64) = (0.9, 1.1);

#[test]
fn criterion_03_ar1_errors_match_lagged_ols() {
    let n = 5000;
    let split = 4000;
    let mut ratios = Vec::new();
    for seed in 0..10 {
        // y_t = 1 + 0.5 x_t + eta_t with AR(1) errors, x itself persistent.
        let x = simulate_arma(&[0.6], &[], 1.0, 200, n, 50 + seed);
        let eta = simulate_arma(&[0.7], &[], 0.5, 200, n, 80 + seed);
        let y: Vec<f64> = (0..n).map(|t| 1.0 + 0.5 * x[t] + eta[t]).collect();

        let xm = Array2::from_shape_vec((n, 1), x.clone()).unwrap();
        let model = fit(
            &y[..split],
            xm.slice(ndarray::s![..split, ..]),
            ArimaOrder::new(1, 0, 0).unwrap(),
        )
        .unwrap();
        let dyn_pred =
            one_step_predictions(&model, &y[split..], xm.slice(ndarray::s![split.., ..])).unwrap();

        let design = |t: usize| [1.0, x[t], y[t - 1], x[t - 1]];
        let rows = split - 1;
        let a = Array2::from_shape_fn((rows, 4), |(i, j)| design(i + 1)[j]);
        let b = Array1::from_iter((1..split).map(|t| y[t]));
        let coef = lstsq(a.view(), b.view()).unwrap();
        let ols_pred: Vec<f64> = (split..n)
            .map(|t| design(t).iter().zip(coef.iter()).map(|(d, c)| d * c).sum())
            .collect();

        let test = &y[split..];
        let mse = |p: &[f64]| {
            p.iter()
                .zip(test)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / test.len() as f64
        };
        ratios.push(mse(&dyn_pred) / mse(&ols_pred));
    }
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), r| (l.min(*r), h.max(*r)));
    let pass = lo >= EQUIV_BAND.0 && hi <= EQUIV_BAND.1;
    report(
        3,
        "AR(1)-error regression equals lagged OLS",
        pass,
        &format!("MSE ratios in [{lo:.4}, {hi:.4}] over 10 seeds"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 4, 5

fn study(kind: GenerationKind, lags: usize) -> ReplicateStudy {
    let settings = StudySettings {
        lags,
        nodes: 32,
        patience: 10,
        batch_size: 32,
        ..Default::default()
    };
    replicate_simulation_study(kind, 10, &ModelKind::STUDY, &settings, 0, workers(), None).unwrap()
}

fn medians(study: &ReplicateStudy) -> Vec<(ModelKind, f64)> {
    study
        .summary
        .iter()
        .map(|s| (s.model, s.median.unwrap_or(f64::NAN)))
        .collect()
}

fn show(medians: &[(ModelKind, f64)]) -> String {
    medians
        .iter()
        .map(|(m, v)| format!("{m}={v:.5}"))
        .collect::<Vec<_>>()
        .join(" ")
}

const BAND_RATIO: f64 = 3.0;
const ARIMA_VS_BEST: f64 = 1.5;

#[test]
fn criterion_04_simple_simulation_ordering() {
    let s = study(GenerationKind::Simple, 20);
    let failed: usize = s.summary.iter().map(|r| r.failed).sum();
    let med = medians(&s);
    let values: Vec<f64> = med.iter().map(|(_, v)| *v).collect();
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
    let arima = med.iter().find(|(m, _)| *m == ModelKind::Arima).unwrap().1;
    let pass = failed == 0 && hi / lo <= BAND_RATIO && arima <= ARIMA_VS_BEST * lo;
    report(
        4,
        "simple simulation, 10 replicates",
        pass,
        &format!(
            "medians {}; spread {:.2}x, arima/best {:.2}",
            show(&med),
            hi / lo,
            arima / lo
        ),
    );
    assert!(pass);
}

const LSTM_VS_ARIMA: f64 = 0.5;

#[test]
fn criterion_05_gr4j_simulation_ordering() {
    let s = study(GenerationKind::Gr4j, 50);
    let failed: usize = s.summary.iter().map(|r| r.failed).sum();
    let med = medians(&s);
    let get = |m: ModelKind| med.iter().find(|(k, _)| *k == m).unwrap().1;
    let linear_floor = get(ModelKind::Arima).min(get(ModelKind::LinearFfnn));
    let nonlinear = [
        ModelKind::Ffnn1,
        ModelKind::Ffnn2,
        ModelKind::Lstm1,
        ModelKind::Lstm2,
    ];
    let beats = nonlinear.iter().all(|m| get(*m) < linear_floor);
    let lstm_ratio = get(ModelKind::Lstm1) / get(ModelKind::Arima);
    let pass = failed == 0 && beats && lstm_ratio <= LSTM_VS_ARIMA;
    report(
        5,
        "GR4J simulation, 10 replicates",
        pass,
        &format!("medians {}; lstm1/arima {lstm_ratio:.3}", show(&med)),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 6

/// Neighbouring lag counts may disagree by this factor before the trend
/// counts as broken.
const LAG_NOISE: f64 = 1.5;

#[test]
fn criterion_06_longer_lags_help() {
    let template = ExperimentConfig {
        model: ModelKind::Lstm1,
        data: DataSource::Generated(GenerationSpec::new(GenerationKind::Gr4j, 0)),
        ..Default::default()
    };
    let (table, _) = lag_sensitivity(&template, &LAG_STUDY_LAGS, workers()).unwrap();
    let arima: Vec<f64> = table
        .iter()
        .map(|r| r.arima_mse.unwrap_or(f64::NAN))
        .collect();
    let lstm: Vec<f64> = table
        .iter()
        .map(|r| r.lstm_mse.unwrap_or(f64::NAN))
        .collect();
    let trend = |v: &[f64]| v.windows(2).all(|w| w[1] <= LAG_NOISE * w[0]) && v[v.len() - 1] < v[0];
    let pass = trend(&arima) && trend(&lstm);
    let rows: Vec<String> = table
        .iter()
        .map(|r| {
            format!(
                "L{}: arima {:.5} {} / lstm {:.5} ({} ep)",
                r.lags,
                r.arima_mse.unwrap_or(f64::NAN),
                r.arima_order.clone().unwrap_or_default(),
                r.lstm_mse.unwrap_or(f64::NAN),
                r.lstm_epochs.unwrap_or(0)
            )
        })
        .collect();
    report(6, "lag sensitivity trend", pass, &rows.join("; "));
    assert!(pass);
}

// ---------------------------------------------------------------- 7

const BALANCE_TOL: f64 = 1e-9;
const TRANSCRIPTION_TOL: f64 = 1e-10;

/// Textbook daily GR4J written against a shifting register (the usual
/// presentation), converted to and from the library's pending buffers.
mod gr4j_reference {
    pub struct Out {
        pub s: f64,
        pub r: f64,
        pub uh1: Vec<f64>,
        pub uh2: Vec<f64>,
        pub q: f64,
    }

    fn ss1(t: f64, x4: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if t < x4 {
            (t / x4).powf(2.5)
        } else {
            1.0
        }
    }

    fn ss2(t: f64, x4: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if t <= x4 {
            0.5 * (t / x4).powf(2.5)
        } else if t < 2.0 * x4 {
            1.0 - 0.5 * (2.0 - t / x4).powf(2.5)
        } else {
            1.0
        }
    }

    /// Register update: slot k takes slot k+1 plus its share of today's
    /// input; slot 0 is released. Pending slot j is register slot j+1.
    fn route(pending: &[f64], ord: &[f64], input: f64) -> (f64, Vec<f64>) {
        let n = ord.len();
        let mut reg = vec![0.0; n + 1];
        reg[1..=n].copy_from_slice(pending);
        for k in 0..n {
            reg[k] = reg[k + 1] + ord[k] * input;
        }
        reg[n] = 0.0;
        let released = reg[0];
        (released, reg[1..=n].to_vec())
    }

    #[allow(clippy::too_many_arguments)]
    pub fn step(
        x1: f64,
        x2: f64,
        x3: f64,
        x4: f64,
        s: f64,
        r: f64,
        uh1: &[f64],
        uh2: &[f64],
        p: f64,
        e: f64,
    ) -> Out {
        let n1 = x4.ceil() as usize;
        let n2 = (2.0 * x4).ceil() as usize;
        let o1: Vec<f64> = (1..=n1)
            .map(|j| ss1(j as f64, x4) - ss1(j as f64 - 1.0, x4))
            .collect();
        let o2: Vec<f64> = (1..=n2)
            .map(|j| ss2(j as f64, x4) - ss2(j as f64 - 1.0, x4))
            .collect();

        let (pn, en) = if p >= e { (p - e, 0.0) } else { (0.0, e - p) };
        let mut s = s;
        let mut ps = 0.0;
        if pn > 0.0 {
            let w = (pn / x1).tanh();
            ps = x1 * (1.0 - (s / x1).powi(2)) * w / (1.0 + s / x1 * w);
        }
        if en > 0.0 {
            let w = (en / x1).tanh();
            let es = s * (2.0 - s / x1) * w / (1.0 + (1.0 - s / x1) * w);
            s -= es;
        }
        s += ps;
        let perc = s * (1.0 - (1.0 + (4.0 * s / (9.0 * x1)).powi(4)).powf(-0.25));
        s -= perc;
        let pr = perc + (pn - ps);

        let (q9, uh1) = route(uh1, &o1, 0.9 * pr);
        let (q1, uh2) = route(uh2, &o2, 0.1 * pr);

        let f = x2 * (r / x3).powf(3.5);
        let mut r = (r + q9 + f).max(0.0);
        let qr = r * (1.0 - (1.0 + (r / x3).powi(4)).powf(-0.25));
        r -= qr;
        let qd = (q1 + f).max(0.0);
        Out {
            s,
            r,
            uh1,
            uh2,
            q: qr + qd,
        }
    }
}

#[test]
fn criterion_07_gr4j_invariants() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let steps = 100_000;
    let (mut worst_balance, mut worst_ref, mut s_violations, mut r_violations) =
        (0.0f64, 0.0f64, 0, 0);
    for i in 0..steps {
        let no_exchange = i % 2 == 0;
        let params = Gr4jParams {
            x1: rng.gen_range(50.0..1500.0),
            x2: if no_exchange {
                0.0
            } else {
                rng.gen_range(-5.0..3.0)
            },
            x3: rng.gen_range(10.0..400.0),
            x4: rng.gen_range(0.5..4.0),
        };
        let mut state = Gr4jState::new(&params, rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0));
        for v in state.uh1.iter_mut().chain(state.uh2.iter_mut()) {
            *v = rng.gen_range(0.0..5.0);
        }
        let p = if rng.gen_bool(0.4) {
            0.0
        } else {
            -rng.gen_range(1e-9f64..1.0).ln() * 15.0
        };
        let e = rng.gen_range(0.0..10.0);
        let (next, q, fluxes) = gr4j_step(&params, &state, p, e).unwrap();
        worst_balance = worst_balance.max(fluxes.balance_residual().abs());
        if !(0.0..=params.x1).contains(&next.s) {
            s_violations += 1;
        }
        if no_exchange && next.r > params.x3 * (1.0 + 1e-9) {
            r_violations += 1;
        }
        let re = gr4j_reference::step(
            params.x1, params.x2, params.x3, params.x4, state.s, state.r, &state.uh1, &state.uh2,
            p, e,
        );
        let mut gap = (re.s - next.s)
            .abs()
            .max((re.r - next.r).abs())
            .max((re.q - q).abs());
        for (a, b) in re
            .uh1
            .iter()
            .chain(&re.uh2)
            .zip(next.uh1.iter().chain(&next.uh2))
        {
            gap = gap.max((a - b).abs());
        }
        worst_ref = worst_ref.max(gap);
    }
    let (o1, o2) = uh_ordinates(&Gr4jParams::default());
    let ords_sum = (o1.iter().sum::<f64>() - 1.0)
        .abs()
        .max((o2.iter().sum::<f64>() - 1.0).abs());
    let secs = start.elapsed().as_secs_f64();
    let pass = worst_balance <= BALANCE_TOL
        && worst_ref <= TRANSCRIPTION_TOL
        && s_violations == 0
        && r_violations == 0
        && ords_sum < 1e-12
        && secs < 60.0;
    report(
        7,
        "GR4J physical invariants",
        pass,
        &format!(
            "{steps} steps: balance {worst_balance:.1e}, reference gap {worst_ref:.1e}, S out of range {s_violations}, R above x3 {r_violations}, {secs:.1}s"
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 8

#[test]
fn criterion_08_lstm_cell_algebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut exact = true;
    for _ in 0..100 {
        let (p, m) = (rng.gen_range(1..5), rng.gen_range(1..6));
        let layer = LstmLayer::zeros(p, m);
        let x: Vec<f64> = (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let prev = CellState {
            h: (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            s: (0..m).map(|_| rng.gen_range(-5.0..5.0)).collect(),
        };
        let next = lstm_cell_step(&layer, &x, &prev).unwrap();
        for j in 0..m {
            exact &= next.s[j] == 0.5 * prev.s[j] && next.h[j] == 0.5 * next.s[j].tanh();
        }
    }
    let mut in_range = 0;
    let passes = 10_000;
    for _ in 0..passes {
        let (p, m) = (rng.gen_range(1..4), rng.gen_range(1..5));
        let mut layer = LstmLayer::zeros(p, m);
        let scale = rng.gen_range(0.1..3.0);
        layer.w_x.mapv_inplace(|_| rng.gen_range(-scale..scale));
        layer.w_h.mapv_inplace(|_| rng.gen_range(-scale..scale));
        layer.bias.mapv_inplace(|_| rng.gen_range(-scale..scale));
        let x: Vec<f64> = (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let prev = CellState {
            h: (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            s: (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        };
        let (next, g) = lstm_cell_step_with_gates(&layer, &x, &prev).unwrap();
        let unit = |v: &[f64]| v.iter().all(|v| *v > 0.0 && *v < 1.0);
        let signed = |v: &[f64]| v.iter().all(|v| *v > -1.0 && *v < 1.0);
        if unit(&g.input)
            && unit(&g.forget)
            && unit(&g.output)
            && signed(&g.candidate)
            && signed(&next.h)
        {
            in_range += 1;
        }
    }
    let pass = exact && in_range == passes;
    report(
        8,
        "LSTM cell algebra",
        pass,
        &format!(
            "zero-parameter halving exact: {exact}; gate ranges held in {in_range}/{passes} passes"
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 9

const SEASONAL_R: f64 = 0.8;

fn monthly_rain(d: &Dataset) -> Vec<f64> {
    let rain = d.values("rain").unwrap();
    let mut sums = [0.0; 12];
    let mut counts = [0.0; 12];
    for (i, r) in rain.iter().enumerate() {
        let month = d.columns()[0]
            .date(i)
            .format("%m")
            .to_string()
            .parse::<usize>()
            .unwrap()
            - 1;
        sums[month] += r;
        counts[month] += 1.0;
    }
    sums.iter().zip(counts).map(|(s, c)| s / c).collect()
}

#[test]
fn criterion_09_bootstrap_keeps_the_season() {
    let source = synthetic_climate(&ClimateSpec::default(), 1).unwrap();
    let base = monthly_rain(&source);
    let spec = BootstrapSpec::default();
    let (mut violations, mut checked, mut worst_r) = (0usize, 0usize, 1.0f64);
    for seed in 0..10 {
        let out = block_bootstrap(
            &source,
            &BootstrapSpec {
                seed,
                ..spec.clone()
            },
        )
        .unwrap();
        let idx = out.source_index();
        for block in &out.blocks {
            for k in 0..block.len {
                let i = block.out_start + k;
                let shift =
                    calendar::doy_distance(out.data.day_of_year(i), source.day_of_year(idx[i]))
                        as usize;
                checked += 1;
                if shift > spec.start_jitter_days + block.len - 1 {
                    violations += 1;
                }
            }
        }
        worst_r = worst_r.min(pearson(&monthly_rain(&out.data), &base));
    }
    let pass = violations == 0 && checked == 36_500 && worst_r > SEASONAL_R;
    report(
        9,
        "bootstrap seasonality",
        pass,
        &format!(
            "{violations} displacement violations in {checked} days; min monthly r {worst_r:.3}"
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 10

fn csv_bytes<T: serde::Serialize>(rows: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    write_csv(rows, &mut out).unwrap();
    out
}

#[test]
fn criterion_10_determinism_and_no_leakage() {
    let mut spec = GenerationSpec::new(GenerationKind::Gr4j, 5);
    spec.bootstrap.target_years = 3;
    let a = generate(&spec, None).unwrap();
    let b = generate(&spec, None).unwrap();
    let same_data = dataset_digest(&a.0) == dataset_digest(&b.0) && a.1 == b.1;

    let grid = GridSpec {
        models: ModelKind::STUDY.to_vec(),
        lags: vec![3],
        nodes: vec![4],
        max_epochs: 4,
        replicates: 2,
        base_seed: 9,
        data: DataSource::Generated(spec.clone()),
        ..Default::default()
    };
    let cancel = AtomicBool::new(false);
    let serial = run_grid(&grid, 1, Some(&cancel)).unwrap();
    let parallel = run_grid(&grid, 4, Some(&cancel)).unwrap();
    let same_grid = serial.complete && csv_bytes(&serial.rows) == csv_bytes(&parallel.rows);

    let data = load_data(&DataSource::Generated(spec)).unwrap();
    let mut leak_free = 0;
    for model in ModelKind::STUDY {
        let config = ExperimentConfig {
            model,
            lags: 3,
            nodes: 4,
            max_epochs: 4,
            ..Default::default()
        };
        let base = fit_experiment(&config, &data).unwrap();
        let (train, val, _) = config.split().sizes(data.len() - config.lags).unwrap();
        let first_test_day = config.lags + train + val;
        let mutated = Dataset::new(
            data.columns()
                .iter()
                .map(|c| {
                    let v = c.values().iter().enumerate().map(|(i, x)| {
                        if i >= first_test_day {
                            1.0 + 2.0 * x
                        } else {
                            *x
                        }
                    });
                    TimeSeries::new(c.name(), c.t0(), v.collect()).unwrap()
                })
                .collect(),
        )
        .unwrap();
        let again = fit_experiment(&config, &mutated).unwrap();
        if base.model == again.model
            && base.scaler == again.scaler
            && base.test_pred != again.test_pred
        {
            leak_free += 1;
        }
    }
    let pass = same_data && same_grid && leak_free == ModelKind::STUDY.len();
    report(
        10,
        "determinism and leakage",
        pass,
        &format!(
            "generation identical: {same_data}; grid at 1 vs 4 workers identical: {same_grid}; fits unchanged by test-block edits: {leak_free}/6"
        ),
    );
    assert!(pass);
}

#[test]
fn dates_in_reports_are_calendar_days() {
    // Guards the month bucketing used above against a shifted t0.
    let t0 = NaiveDate::from_ymd_opt(1990, 1, 1).unwrap();
    let d = Dataset::from_columns(t0, vec![("rain", vec![1.0; 365])]).unwrap();
    assert_eq!(monthly_rain(&d), vec![1.0; 12]);
}
