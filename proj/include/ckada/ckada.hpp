#pragma once

#include "ckada/benchmark.hpp"
#include "ckada/classifiers.hpp"
#include "ckada/csv.hpp"
#include "ckada/dataset.hpp"
#include "ckada/eigensolver.hpp"
#include "ckada/embedding.hpp"
#include "ckada/error.hpp"
#include "ckada/kernels.hpp"
#include "ckada/model_io.hpp"
#include "ckada/model_selection.hpp"
#include "ckada/parallel.hpp"
#include "ckada/random.hpp"
#include "ckada/render.hpp"
#include "ckada/scatter.hpp"
#include "ckada/waveform.hpp"
