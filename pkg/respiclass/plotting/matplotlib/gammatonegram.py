# coding=utf-8

"""
.. module:: respiclass.plotting.matplotlib.gammatonegram

    :synopsis:  Gammatonegram and training curve plots
"""

import numpy as np
from matplotlib import axes, figure
from matplotlib.backends.backend_agg import FigureCanvasAgg

from ...processing.frontend import FrontEndConfig, erb_space


class Gammatonegram(object):
    """This class plots the gammatonegram patches of a cycle.

    The patches are drawn side by side along the time axis, low frequency
    channels at the bottom. The vertical axis is labeled with the center
    frequencies of the gammatone filters and the horizontal axis with time
    from the start of the first patch, both taken from the front-end
    settings.

    Attributes:
        figure: The matplotlib figure (None when drawing into given axes).
        axes: The axes the gammatonegram is drawn in.
        patches: The GamPatch objects of the cycle, in patch order.
        config: The FrontEndConfig the patches were computed with.
        threshold: Lower and upper display limits.
        cmap: A colormap name or Colormap instance.
    """

    def __init__(self, mpl_container, patches, config=None, threshold=None,
                 cmap='magma'):
        """Initializes the Gammatonegram class.

        Args:
            mpl_container: A figure or axes (or None to create a figure).
            patches (list): GamPatch objects of one cycle.
            config (FrontEndConfig): The front-end settings.
            threshold (list): Lower and upper display limits. Defaults to
                [0, 1], the range of normalized patch values.
            cmap (str or Colormap instance): A colormap for the plot.

        Raises:
            ValueError: mpl_container is not a figure or axes, or there are
                no patches.
        """

        if mpl_container is None:
            self.figure = figure.Figure(figsize=(10, 4))
            FigureCanvasAgg(self.figure)
            self.axes = self.figure.gca()
        elif isinstance(mpl_container, figure.Figure):
            self.figure = mpl_container
            self.axes = mpl_container.gca()
        elif isinstance(mpl_container, axes.Axes):
            self.figure = None
            self.axes = mpl_container
        else:
            raise ValueError("You must pass either a matplotlib figure or "
                             "axes specifying where the gammatonegram will be "
                             "rendered.")

        if not patches:
            raise ValueError("There are no patches to plot.")

        self.patches = sorted(patches, key=lambda patch: patch.patch_index)
        self.config = config if config is not None else FrontEndConfig()
        self.threshold = threshold if threshold else [0.0, 1.0]
        self.cmap = cmap

        self.update()


    def update(self):
        """Updates the plot."""

        data = np.concatenate([patch.values for patch in self.patches],
                axis=1)
        n_channels, n_frames = data.shape

        duration = n_frames * self.config.hop_size
        self.axes_image = self.axes.imshow(data, cmap=self.cmap,
                vmin=self.threshold[0], vmax=self.threshold[1], aspect='auto',
                interpolation='none', origin='lower',
                extent=[0.0, duration, -0.5, n_channels - 0.5])

        # Label a handful of channels with their center frequency.
        center_freqs = erb_space(self.config.band_low, self.config.band_high,
                n_channels)
        ticks = np.unique(np.linspace(0, n_channels - 1, 6).astype(int))
        self.axes.set_yticks(ticks)
        self.axes.set_yticklabels(['%.0f' % center_freqs[i] for i in ticks])

        # Patch boundaries.
        patch_time = self.patches[0].values.shape[1] * self.config.hop_size
        for i in range(1, len(self.patches)):
            self.axes.axvline(i * patch_time, color='w', linewidth=0.8)

        self.axes.set_xlabel('time (s)')
        self.axes.set_ylabel('center frequency (Hz)')
        self.axes.set_title(self.patches[0].cycle_id)


    def save(self, filename, dpi=100):
        if self.figure is None:
            raise ValueError("Only a gammatonegram that owns its figure can "
                             "be saved.")
        self.figure.savefig(filename, dpi=dpi)


def plot_training_log(mpl_container, training_log, title=None):
    """Plots the per-epoch loss (and training accuracy when logged).

    Args:
        mpl_container: A figure or axes (or None to create a figure).
        training_log (TrainingLog): The log to plot.

    Returns:
        The figure drawn into (None when given axes).
    """

    if mpl_container is None:
        fig = figure.Figure(figsize=(8, 4))
        FigureCanvasAgg(fig)
        loss_axes = fig.gca()
    elif isinstance(mpl_container, figure.Figure):
        fig = mpl_container
        loss_axes = fig.gca()
    elif isinstance(mpl_container, axes.Axes):
        fig = None
        loss_axes = mpl_container
    else:
        raise ValueError("You must pass either a matplotlib figure or axes.")

    frame = training_log.to_frame()
    loss_axes.plot(frame['epoch'], frame['loss'], color='C0', label='loss')
    loss_axes.set_xlabel('epoch')
    loss_axes.set_ylabel('loss')
    loss_axes.grid(True)

    if frame['train_acc'].notna().any():
        acc_axes = loss_axes.twinx()
        acc_axes.plot(frame['epoch'], frame['train_acc'], color='C1',
                label='train_acc')
        acc_axes.set_ylabel('training accuracy')
        acc_axes.set_ylim(0.0, 1.0)

    if title:
        loss_axes.set_title(title)

    return fig
