################################
# Miva Desk I2V Adapter Suite  #
# __schema__.py                #
# Copyright 2026               #
# The Miva Desk Authors        #
################################

# **********
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to
# deal in the Software without restriction, including without limitation the
# rights to use, copy, modify, merge, publish, distribute, sublicense, and/or
# sell copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in
# all copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING
# FROM, OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS
# IN THE SOFTWARE.
# **********

# JSON Schemas
# These are the schemas for validating the config and the JSON metadata carried inside Miva Desk artifacts.
# They are stuck here in variables so they travel with the package instead of being looked up on disk.

import json

# Schema for the flat key = value config. Every key documents its default here.
_S_CONFIG = """
{
  "type": "object",
  "additionalProperties": false,
  "properties": {
    "frames": {"type": "integer", "minimum": 2, "default": 8},
    "clip_frames": {"type": "integer", "minimum": 2, "default": 16},
    "clips": {"type": "integer", "minimum": 1, "default": 10},
    "image_size": {"type": "integer", "minimum": 1, "default": 64},
    "patch_size": {"type": "integer", "minimum": 1, "default": 4},
    "channels": {"type": "integer", "minimum": 3, "default": 8},
    "token_dim": {"type": "integer", "minimum": 2, "default": 32},
    "blocks": {"type": "integer", "minimum": 1, "default": 2},
    "ranks.cfa": {"type": "integer", "minimum": 1, "default": 8},
    "ranks.ca": {"type": "integer", "minimum": 1, "default": 4},
    "ranks.tsa": {"type": "integer", "minimum": 1, "default": 4},
    "epsilon_mask": {"type": "number", "exclusiveMinimum": 0, "default": 1e-6},
    "mask_steps": {"type": "string", "minLength": 1, "default": "0:40:5"},
    "alpha_shared": {"type": "number", "minimum": 0, "maximum": 1, "default": 0.2},
    "lowpass_ratio": {"type": "number", "exclusiveMinimum": 0, "maximum": 1, "default": 0.25},
    "adain": {"type": "boolean", "default": true},
    "diffusion_steps": {"type": "integer", "minimum": 2, "default": 1000},
    "ddim_steps": {"type": "integer", "minimum": 1, "default": 50},
    "beta_start": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1, "default": 1e-4},
    "beta_end": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1, "default": 0.02},
    "lr": {"type": "number", "minimum": 0, "default": 1e-5},
    "iters": {"type": "integer", "minimum": 0, "default": 2000},
    "base_lr": {"type": "number", "minimum": 0, "default": 1e-4},
    "base_iters": {"type": "integer", "minimum": 0, "default": 5000},
    "prompt_dropout": {"type": "number", "minimum": 0, "maximum": 1, "default": 0.1},
    "base_anchor_prob": {"type": "number", "minimum": 0, "maximum": 1, "default": 0.0},
    "seed": {"type": "integer", "minimum": 0, "default": 0},
    "log.verbose": {"type": "boolean", "default": false},
    "log.file": {"type": "string", "default": ""},
    "log.halt": {"type": "boolean", "default": false},
    "log.suppress": {"type": "string", "default": ""},
    "log.suppress_halt": {"type": "string", "default": ""},
    "ledger": {"type": "string", "default": "miva.ledger"}
  }
}
"""

# Schema for the metadata block of a MIVA1 container.
_S_CHECKPOINT = """
{
  "type": "object",
  "properties": {
    "kind": {"enum": ["base", "miva", "mmiva"]},
    "pattern": {"type": "string"},
    "base_hash": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
    "ranks": {
      "type": "object",
      "properties": {
        "cfa": {"type": "integer", "minimum": 1},
        "ca": {"type": "integer", "minimum": 1},
        "tsa": {"type": "integer", "minimum": 1}
      }
    },
    "model": {"type": "object"},
    "config": {"type": "object"},
    "arrays": {
      "type": "array",
      "items": {
        "type": "object",
        "properties": {
          "name": {"type": "string"},
          "shape": {"type": "array", "items": {"type": "integer", "minimum": 0}}
        },
        "required": ["name", "shape"]
      }
    },
    "loss_curve": {"type": "array", "items": {"type": "number"}},
    "parameters": {"type": "object"}
  },
  "required": ["kind", "model", "config", "arrays"]
}
"""

# Schema for the metadata block of a MIVV container.
_S_VIDEO = """
{
  "type": "object",
  "properties": {
    "config": {"type": "object"},
    "pattern": {"type": "string"},
    "timing": {"type": "object"}
  },
  "required": ["config"]
}
"""

# Schema for a dataset directory's index.json.
_S_DATASET = """
{
  "type": "object",
  "properties": {
    "pattern": {"type": "string"},
    "config": {"type": "object"},
    "clips": {
      "type": "array",
      "minItems": 1,
      "items": {
        "type": "object",
        "properties": {
          "video": {"type": "string"},
          "masks": {"type": ["string", "null"]},
          "pattern": {"type": "string"},
          "seed": {"type": "integer"}
        },
        "required": ["video", "masks", "pattern"]
      }
    }
  },
  "required": ["pattern", "clips"]
}
"""

# Dictionary storing all schema files by name.
_SCHEMA = {
    "config": json.loads(_S_CONFIG),
    "checkpoint": json.loads(_S_CHECKPOINT),
    "video": json.loads(_S_VIDEO),
    "dataset": json.loads(_S_DATASET),
}
