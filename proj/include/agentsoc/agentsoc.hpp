#pragma once

#include "agentsoc/analytics.hpp"
#include "agentsoc/backend.hpp"
#include "agentsoc/clustering.hpp"
#include "agentsoc/config.hpp"
#include "agentsoc/errors.hpp"
#include "agentsoc/mbti.hpp"
#include "agentsoc/move_parser.hpp"
#include "agentsoc/prompt.hpp"
#include "agentsoc/remote_backend.hpp"
#include "agentsoc/runner.hpp"
#include "agentsoc/step.hpp"
#include "agentsoc/transcript_io.hpp"
#include "agentsoc/world.hpp"
