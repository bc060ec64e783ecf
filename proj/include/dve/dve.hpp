#pragma once

#include "dve/checkpoint.hpp"
#include "dve/encoders.hpp"
#include "dve/errors.hpp"
#include "dve/evaluation.hpp"
#include "dve/graph.hpp"
#include "dve/io.hpp"
#include "dve/losses.hpp"
#include "dve/optimizer.hpp"
#include "dve/parallel.hpp"
#include "dve/rng.hpp"
#include "dve/sampling.hpp"
#include "dve/sparse.hpp"
#include "dve/tape.hpp"
#include "dve/tensor.hpp"
#include "dve/trainer.hpp"
