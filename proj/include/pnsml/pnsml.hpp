#pragma once

#include "pnsml/activation.hpp"
#include "pnsml/bounds.hpp"
#include "pnsml/datagen.hpp"
#include "pnsml/ensemble.hpp"
#include "pnsml/error.hpp"
#include "pnsml/eval.hpp"
#include "pnsml/hash.hpp"
#include "pnsml/informer.hpp"
#include "pnsml/io.hpp"
#include "pnsml/mlp.hpp"
#include "pnsml/model.hpp"
#include "pnsml/pipeline.hpp"
#include "pnsml/rng.hpp"
#include "pnsml/scm.hpp"
#include "pnsml/training_set.hpp"
#include "pnsml/tree.hpp"
#include "pnsml/tune.hpp"
