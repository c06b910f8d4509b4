#pragma once

// Core library: everything except the JSON and command-line layers.

#include "vqakit/ensemble.hpp"
#include "vqakit/error.hpp"
#include "vqakit/imageops.hpp"
#include "vqakit/metrics.hpp"
#include "vqakit/netpbm.hpp"
#include "vqakit/prompt.hpp"
#include "vqakit/tensor.hpp"
#include "vqakit/textkit.hpp"
#include "vqakit/toynet.hpp"
#include "vqakit/training.hpp"
