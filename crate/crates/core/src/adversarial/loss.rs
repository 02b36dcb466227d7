use crate::adversarial::nets::{DiscriminatorSpec, PotentialSpec};
use crate::diff::{Tape, Var};
use crate::error::{Error, Result};
use crate::eval::sliced_w1_tape;
use crate::matrix::Matrix;
use crate::models::{replay, GeneratorSpec, LatentBatch, SampleBatch, TargetSpec};
use crate::params::ParamVector;
use crate::scalar::Scalar;

/// `−E log f(x_real) − E log(1 − f(x_fake))` on a tape.
pub fn disc_loss_tape<'t, T: Scalar>(
    disc: &DiscriminatorSpec,
    omega: Var<'t, T>,
    real: Var<'t, T>,
    fake: Var<'t, T>,
) -> Var<'t, T> {
    let dr = disc.forward(omega, real);
    let df = disc.forward(omega, fake);
    -(dr.ln().mean() + df.neg().shift(T::one()).ln().mean())
}

/// Non-saturating generator loss `−E log f(g(θ, z))` on a tape.
pub fn gen_loss_tape<'t, T: Scalar>(
    disc: &DiscriminatorSpec,
    omega: Var<'t, T>,
    fake: Var<'t, T>,
) -> Var<'t, T> {
    -disc.forward(omega, fake).ln().mean()
}

/// Discriminator loss on value batches.
pub fn disc_loss<T: Scalar>(
    disc: &DiscriminatorSpec,
    omega: &ParamVector<T>,
    real: &SampleBatch<T>,
    fake: &SampleBatch<T>,
) -> Result<T> {
    if real.is_empty() || fake.is_empty() {
        return Err(Error::usage("batches must be nonempty"));
    }
    let tape = Tape::new();
    let out = disc_loss_tape(
        disc,
        tape.constant(omega.as_column()),
        tape.constant(real.x.clone()),
        tape.constant(fake.x.clone()),
    );
    tape.check()?;
    Ok(out.item())
}

/// Generator loss on a value batch.
pub fn gen_loss_nonsaturating<T: Scalar>(
    disc: &DiscriminatorSpec,
    omega: &ParamVector<T>,
    fake: &SampleBatch<T>,
) -> Result<T> {
    let tape = Tape::new();
    let out = gen_loss_tape(
        disc,
        tape.constant(omega.as_column()),
        tape.constant(fake.x.clone()),
    );
    tape.check()?;
    Ok(out.item())
}

/// Empirical `W₁` between `g(θ, Z)` on `latent` and a target batch of the
/// same size: sorted coupling for `n = 1`, sliced for `n = 2`.
pub fn direct_w1_loss<T: Scalar>(
    gen: &GeneratorSpec,
    theta: &ParamVector<T>,
    latent: &LatentBatch<T>,
    target: &SampleBatch<T>,
) -> Result<T> {
    if gen.output_dim > 2 {
        return Err(Error::UnsupportedDimension(format!(
            "direct W1 supports n <= 2, got n = {}",
            gen.output_dim
        )));
    }
    if target.len() != latent.len() {
        return Err(Error::usage(
            "target and generated batches must have equal sizes",
        ));
    }
    let x = replay(gen, theta.values(), latent)?;
    let tape = Tape::new();
    let out = sliced_w1_tape(&tape, tape.constant(x.x), &target.x);
    tape.check()?;
    Ok(out.item())
}

/// Convenience: [`direct_w1_loss`] against `rows` samples of `target`.
pub fn direct_w1_loss_to_target<T: Scalar>(
    gen: &GeneratorSpec,
    theta: &ParamVector<T>,
    latent: &LatentBatch<T>,
    target: &TargetSpec,
    seed: u64,
) -> Result<T> {
    let t = target.batch(seed, 0, latent.len());
    direct_w1_loss(gen, theta, latent, &t)
}

/// `E[Φ_p(x) − Φ_p(y) − ½‖∇Φ_p(y)‖²]`.
pub fn potential_objective_tape<'t, T: Scalar>(
    tape: &'t Tape<T>,
    pot: &PotentialSpec,
    p: Var<'t, T>,
    x: Var<'t, T>,
    y: Var<'t, T>,
) -> Var<'t, T> {
    let (phi_x, _) = pot.value_and_grad(tape, p, x);
    let (phi_y, grad_y) = pot.value_and_grad(tape, p, y);
    let b = T::of_usize(y.rows());
    phi_x.mean() - phi_y.mean() - grad_y.norm_sq().scale(T::half() / b)
}

/// Gradient ascent on the potential objective over fixed batches.
/// Returns the fitted parameters and the learned `D̃² = 2 sup_p J(p)`.
pub fn fit_potential<T: Scalar>(
    pot: &PotentialSpec,
    p0: &ParamVector<T>,
    x: &Matrix<T>,
    y: &Matrix<T>,
    iters: usize,
    opt: &mut crate::optim::InnerOptimizer<T>,
) -> Result<(ParamVector<T>, T)> {
    let mut p = p0.values().to_vec();
    for _ in 0..iters {
        let tape = Tape::new();
        let pv = tape.leaf(Matrix::column(p.clone()));
        let j = potential_objective_tape(
            &tape,
            pot,
            pv,
            tape.constant(x.clone()),
            tape.constant(y.clone()),
        );
        tape.check()?;
        let g = tape.backward(j, Matrix::scalar(T::one())).wrt(pv);
        tape.check()?;
        let neg: Vec<T> = g.as_slice().iter().map(|v| -*v).collect();
        opt.step(&mut p, &neg)?;
    }
    let tape = Tape::new();
    let j = potential_objective_tape(
        &tape,
        pot,
        tape.constant(Matrix::column(p.clone())),
        tape.constant(x.clone()),
        tape.constant(y.clone()),
    );
    tape.check()?;
    let learned = j.item() * T::two();
    Ok((p0.with_values(p)?, learned))
}
