import matplotlib
matplotlib.use('Agg')

import matplotlib.pyplot as plt
import pytest
from astropy.visualization import ImageNormalize

from dmac.harness import ExperimentSpec, SweepSpec, run_experiment, run_sweep
from dmac.plots import plot_run, plot_sweep, plot_field, figure_saver

@pytest.fixture(scope='module')
def mck_log():
    return run_experiment(ExperimentSpec(name='mck', plant='mck', duration=3.0))

@pytest.fixture(scope='module')
def burgers_log():
    return run_experiment(ExperimentSpec(name='burgers', plant='burgers', T_s=0.01, duration=0.1,
                                         forgetting=0.9995, R_1=10.0, R_2=0.1, record_state=True))

def test_plot_run(mck_log, tmp_path):
    filename = tmp_path / 'run.png'

    with figure_saver(str(filename), figsize=(8, 6)) as fig:
        axes = plot_run(mck_log, fig=fig)

    assert len(axes) == 4
    assert len(axes[0].lines) == 2
    assert filename.exists()

def test_plot_run_title(mck_log):
    fig = plt.Figure()
    plot_run(mck_log, fig=fig, title='Nominal run')

    assert fig._suptitle.get_text() == 'Nominal run'

def test_plot_sweep():
    base = ExperimentSpec(name='mck', plant='mck', duration=2.0)
    logs, _ = run_sweep(SweepSpec(base=base, axis='lambda', values=(0.99, 1.0)))

    fig = plt.Figure()
    ax = plot_sweep(logs, ax=fig.add_subplot(1, 1, 1))

    # Two runs and the reference
    assert len(ax.lines) == 3
    assert ax.get_legend() is not None

    ax = plot_sweep(logs, ax=fig.add_subplot(1, 1, 1), what='z')
    assert len(ax.lines) == 2

def test_plot_field(burgers_log):
    fig = plt.Figure()
    ax = fig.add_subplot(1, 1, 1)

    img = plot_field(burgers_log, ax=ax)

    assert img.get_array().shape == (10, 100)

def test_plot_field_stretch(burgers_log):
    fig = plt.Figure()
    img = plot_field(burgers_log, ax=fig.add_subplot(1, 1, 1), stretch='asinh', show_colorbar=False)

    assert isinstance(img.norm, ImageNormalize)

def test_plot_field_requires_state(mck_log):
    fig = plt.Figure()

    with pytest.raises(ValueError):
        plot_field(mck_log, ax=fig.add_subplot(1, 1, 1))
