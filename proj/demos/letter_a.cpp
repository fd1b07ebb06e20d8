// Reconstructs the built-in letter A with a positive and a negative bucket
// order and prints both contrast maps as ASCII art.

#include <cstdio>
#include <vector>

#include "fracgi/builtin_masks.hpp"
#include "fracgi/metrics.hpp"
#include "fracgi/moment_engine.hpp"
#include "fracgi/speckle_sim.hpp"

int main() {
  const auto mask = fracgi::letter_a_mask();
  const auto classes = fracgi::classify_units(mask);
  fracgi::SampleSet samples({1.0, 7, mask.size()}, mask, 100000);
  const std::vector<fracgi::MomentOrder> orders{{1.414, 0.5}, {-1.414, 0.5}};
  const auto images = fracgi::multi_order_pass(samples, orders);

  const char* shades = " .:-=+*#%@";
  for (const auto& img : images) {
    std::printf("mu = %+.3f, nu = %.1f, V = %.4f\n", img.order.mu(), img.order.nu(),
                fracgi::empirical_visibility(img, classes));
    double lo = img.g[0], hi = img.g[0];
    for (double v : img.g) lo = std::min(lo, v), hi = std::max(hi, v);
    for (std::size_t y = 0; y < img.height; ++y) {
      std::printf("  ");
      for (std::size_t x = 0; x < img.width; ++x) {
        const double s = (img.g[y * img.width + x] - lo) / (hi - lo);
        std::putchar(shades[static_cast<int>(s * 9.0 + 0.5)]);
        std::putchar(' ');
      }
      std::putchar('\n');
    }
  }
}
