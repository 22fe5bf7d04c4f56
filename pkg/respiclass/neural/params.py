# coding=utf-8

"""
Named trainable parameters and their training state.

A ParamSet owns every array a model trains or carries between batches:
the parameters, their gradients, the Adam moment estimates and step count
and the batchnorm running statistics. Layers look their arrays up by name,
and all updates are done in place, so a layer never holds a stale copy.
"""

import hashlib
from collections import OrderedDict

import numpy as np

from ..errors import CheckpointError


class ParamSet(object):
    """Named parameter arrays plus optimizer and running statistics state.

    Attributes:
        dtype: The numpy dtype of all parameters (float32, or float64 in
            double-precision mode).
        params: OrderedDict name -> parameter array.
        grads: OrderedDict name -> gradient accumulator (same shape).
        decay: The set of parameter names included in the L2 term.
        state: OrderedDict name -> non-trainable array (running statistics).
        adam_m: OrderedDict name -> Adam first moment estimate.
        adam_v: OrderedDict name -> Adam second moment estimate.
        adam_step: The number of Adam updates applied.
    """

    def __init__(self, dtype=np.float32):

        self.dtype = np.dtype(dtype)
        self.params = OrderedDict()
        self.grads = OrderedDict()
        self.decay = set()
        self.state = OrderedDict()
        self.adam_m = OrderedDict()
        self.adam_v = OrderedDict()
        self.adam_step = 0


    def add(self, name, value, decay=False):
        """Registers a parameter and returns its array."""

        if name in self.params:
            raise KeyError('Duplicate parameter name: ' + name)
        value = np.array(value, dtype=self.dtype)
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)
        self.adam_m[name] = np.zeros_like(value)
        self.adam_v[name] = np.zeros_like(value)
        if decay:
            self.decay.add(name)

        return value


    def add_state(self, name, value):
        """Registers a non-trainable state array and returns it."""

        if name in self.state:
            raise KeyError('Duplicate state name: ' + name)
        value = np.array(value, dtype=self.dtype)
        self.state[name] = value

        return value


    def zero_grad(self):
        for grad in self.grads.values():
            grad[...] = 0


    def l2_norm_sq(self):
        """The squared L2 norm over the weight decayed parameters."""
        return float(sum(np.sum(np.square(self.params[name], dtype=np.float64))
                for name in self.params if name in self.decay))


    def n_values(self):
        """The total number of trainable scalars."""
        return int(sum(value.size for value in self.params.values()))


    def optimizer_state(self):
        """Returns the Adam state as an OrderedDict of named arrays."""

        state = OrderedDict()
        for name in self.params:
            state['adam.m/' + name] = self.adam_m[name]
        for name in self.params:
            state['adam.v/' + name] = self.adam_v[name]
        state['adam.step'] = np.array(self.adam_step, dtype=self.dtype)

        return state


    def load(self, params, state=None):
        """Copies arrays into this set, checking names and shapes.

        Args:
            params (dict): name -> array for every parameter of this set.
            state (dict): Optional running statistics and Adam state, named
                as returned by optimizer_state and the state attribute.

        Raises:
            CheckpointError: A parameter is missing, unexpected or has the
                wrong shape.
        """

        missing = [name for name in self.params if name not in params]
        extra = [name for name in params if name not in self.params]
        if missing or extra:
            raise CheckpointError('Checkpoint does not match the model: '
                    'missing %s, unexpected %s' % (missing[:5], extra[:5]))

        for name, value in params.items():
            self._copy_into(self.params[name], value, name)

        if not state:
            return

        for name, value in state.items():
            if name == 'adam.step':
                self.adam_step = int(np.asarray(value).reshape(()))
            elif name.startswith('adam.m/'):
                self._copy_into(self.adam_m[name[7:]], value, name)
            elif name.startswith('adam.v/'):
                self._copy_into(self.adam_v[name[7:]], value, name)
            elif name in self.state:
                self._copy_into(self.state[name], value, name)
            else:
                raise CheckpointError('Unexpected state tensor: ' + name)


    @staticmethod
    def _copy_into(target, value, name):
        value = np.asarray(value)
        if target.shape != value.shape:
            raise CheckpointError('%s: checkpoint shape %r does not match the '
                    'model shape %r' % (name, value.shape, target.shape))
        target[...] = value


    def snapshot(self):
        """Returns copies of the parameters and state (for keep-best)."""
        params = OrderedDict((k, v.copy()) for k, v in self.params.items())
        state = OrderedDict((k, v.copy()) for k, v in self.state.items())
        return params, state


    def digest(self):
        """SHA-256 hex digest of the parameter and running statistic values."""

        sha = hashlib.sha256()
        for group in (self.params, self.state):
            for name in sorted(group):
                sha.update(name.encode('utf-8'))
                sha.update(np.ascontiguousarray(group[name]).tobytes())

        return sha.hexdigest()


    def __contains__(self, name):
        return name in self.params


    def __getitem__(self, name):
        return self.params[name]


    def __len__(self):
        return len(self.params)


    def __str__(self):
        msg = str(self.__class__) + " at " + str(hex(id(self))) + "\n"
        msg = msg + "    parameters: %d (%d values, %s)\n" % (len(self.params),
                self.n_values(), self.dtype.name)
        for name, value in self.params.items():
            msg = msg + "        %s %r%s\n" % (name, value.shape,
                    ' (L2)' if name in self.decay else '')
        msg = msg + "    state arrays: %d\n" % len(self.state)
        msg = msg + "    adam step: %d\n" % self.adam_step
        return msg
