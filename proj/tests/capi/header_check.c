/* The public header must compile as plain C. */
#include "e2i/e2i.h"

int e2i_header_check(void) {
  e2i_metrics m = {0};
  e2i_generation_params p = {0};
  return (int)m.sample_count + p.steps + (int)E2I_OK;
}
