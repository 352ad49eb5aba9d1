from __future__ import absolute_import, division, print_function, unicode_literals

from contextlib import contextmanager

import numpy as np
import matplotlib.pyplot as plt

from astropy.visualization import simple_norm

from mpl_toolkits.axes_grid1 import make_axes_locatable

from .harness import log_columns, log_theta

def colorbar(obj=None, ax=None, size="5%", pad=0.1):
    if obj is not None:
        ax = obj.axes
    elif ax is None:
        ax = plt.gca()

    # create an axes on the right side of ax
    divider = make_axes_locatable(ax)
    cax = divider.append_axes("right", size=size, pad=pad)

    ax.get_figure().colorbar(obj, cax=cax)

    ax.get_figure().sca(ax)

def plot_run(log, fig=None, title=None):
    """Four-panel figure of the closed-loop run.

    Panels show the output together with the reference, the control, the absolute tracking error
    on a logarithmic scale, and the entries of the model estimate :math:`\\Theta_k`.

    :param log: Run log as returned by :func:`dmac.harness.run_experiment`
    :param fig: Matplotlib Figure object to draw into, optional
    :param title: Title for the figure, optional
    :returns: List of the axes
    """
    if fig is None:
        fig = plt.figure(figsize=(10, 8))

    t = np.asarray(log['t'])
    y = log_columns(log, 'y')
    r = log_columns(log, 'r')
    u = log_columns(log, 'u')
    z = log_columns(log, 'z')

    axes = [fig.add_subplot(2, 2, _) for _ in range(1, 5)]

    ax = axes[0]
    for i in range(y.shape[1]):
        ax.plot(t, y[:, i], '-', label='y_%d' % i)
        ax.plot(t, r[:, i], '--', color='gray', label='r_%d' % i)
    ax.set_xlabel('t')
    ax.set_ylabel('Output')
    ax.legend(frameon=False)

    ax = axes[1]
    ax.plot(t, u, '-')
    ax.set_xlabel('t')
    ax.set_ylabel('Control')

    ax = axes[2]
    # Exact zeros can't be shown on the log scale
    absz = np.abs(z)
    absz[absz == 0] = np.nan
    ax.semilogy(t, absz, '-')
    ax.set_xlabel('t')
    ax.set_ylabel('|z|')

    ax = axes[3]
    theta = log_theta(log)
    ax.plot(t, theta.reshape(len(log), -1), '-', lw=1)
    ax.set_xlabel('t')
    ax.set_ylabel('Theta entries')

    if log.meta.get('diverged'):
        for ax in axes:
            ax.axvline(t[-1], color='red', ls=':')

    if title is not None:
        fig.suptitle(title)
    elif 'name' in log.meta:
        fig.suptitle('%s: %s' % (log.meta['name'], log.meta.get('plant', '')))

    return axes

def plot_sweep(logs, axis=None, ax=None, what='y', **kwargs):
    """Overlays the outputs (or tracking errors) of every run of the sweep.

    :param logs: List of run logs as returned by :func:`dmac.harness.run_sweep`
    :param axis: Name of the swept parameter for the legend; taken from the logs if not set
    :param ax: Matplotlib Axes object to be used for plotting, optional
    :param what: Either `y` to plot the outputs, or `z` to plot absolute tracking errors on a logarithmic scale
    :param \\**kwargs: The rest of parameters will be directly passed to :func:`matplotlib.pyplot.plot`
    :returns: Axes object
    """
    if ax is None:
        ax = plt.gca()

    for log in logs:
        name = axis or log.meta.get('axis', 'value')
        label = '%s = %s' % (name, log.meta.get('value'))

        values = log_columns(log, what)[:, 0]
        if what == 'z':
            ax.semilogy(log['t'], np.abs(values), '-', label=label, **kwargs)
        else:
            ax.plot(log['t'], values, '-', label=label, **kwargs)

    if what == 'y' and len(logs):
        ax.plot(logs[0]['t'], log_columns(logs[0], 'r')[:, 0], '--', color='gray', label='reference')

    ax.set_xlabel('t')
    ax.set_ylabel('|z|' if what == 'z' else 'Output')
    ax.legend(frameon=False)

    return ax

def plot_field(log, ax=None, stretch='linear', show_colorbar=True, **kwargs):
    """Space-time image of the full plant state recorded during the run (e.g. Burgers field).

    The run must have been performed with `record_state=True`.

    :param log: Run log as returned by :func:`dmac.harness.run_experiment`
    :param ax: Matplotlib Axes object to be used for plotting, optional
    :param stretch: Image intensity stretching mode - e.g. `linear`, `log`, `asinh`, or anything else supported by Astropy visualization layer
    :param show_colorbar: Whether to show a colorbar alongside the image
    :param \\**kwargs: The rest of parameters will be directly passed to :func:`matplotlib.pyplot.imshow`
    :returns: Image object
    """
    field = log_columns(log, 'x')
    if not field.shape[1]:
        raise ValueError('Full plant state is not recorded in the log')

    if ax is None:
        ax = plt.gca()

    t = np.asarray(log['t'])

    kwargs.setdefault('aspect', 'auto')
    kwargs.setdefault('interpolation', 'nearest')
    if stretch and stretch != 'linear':
        kwargs['norm'] = simple_norm(field, stretch)

    img = ax.imshow(field, origin='lower', extent=[0.5, field.shape[1] + 0.5, t[0], t[-1]], **kwargs)
    ax.set_xlabel('Node')
    ax.set_ylabel('t')

    if show_colorbar:
        colorbar(img, ax=ax)

    return img

@contextmanager
def figure_saver(filename=None, show=False, tight_layout=True, **kwargs):
    """Simple matplotlib Figure() wrapper, implemented as a context manager.
    It stores the figure to specified file, and optionally displays it interactively if run inside Jupyter.

    Intended to be used as:

    .. code-block:: python

        with figure_saver('/tmp/run.png', figsize=(10, 8)) as fig:
            plot_run(log, fig=fig)

    :param filename: Name of a file where to store the image. May be in any format supported by Matplotlib
    :param show: Whether to also display the figure inside Jupyter notebook
    :param tight_layout: Whether to call :code:`fig.tight_layout()` on the figure before saving/displaying it
    :param \\**kwargs: The rest of parameters will be directly passed to :func:`matplotlib.pyplot.Figure`
    """

    fig = plt.Figure(**kwargs)

    try:
        yield fig
    finally:
        if filename:
            if tight_layout:
                fig.tight_layout()
            fig.savefig(filename, bbox_inches='tight')

        if show:
            try:
                from IPython.display import display
                display(fig)
            except ImportError:
                pass
