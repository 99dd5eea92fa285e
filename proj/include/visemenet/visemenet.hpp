#pragma once

#include "visemenet/common.hpp"
#include "visemenet/audio_features.hpp"
#include "visemenet/io.hpp"
#include "visemenet/net_core.hpp"
#include "visemenet/model.hpp"
#include "visemenet/losses.hpp"
#include "visemenet/dataset.hpp"
#include "visemenet/checkpoint.hpp"
#include "visemenet/synth.hpp"
#include "visemenet/trainer.hpp"
#include "visemenet/inference.hpp"
#include "visemenet/evaluation.hpp"
#include "visemenet/gradcheck.hpp"
