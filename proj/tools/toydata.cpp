#include <iostream>

#include "CLI11.hpp"
#include "rosprompt/error.hpp"
#include "rosprompt/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write a seeded synthetic classification task for the toy backend",
               "rosprompt-toydata"};
  std::string out = "toy";
  std::uint64_t seed = 7;
  rosprompt::SyntheticSpec spec;
  app.add_option("-o,--out", out, "Output directory");
  app.add_option("--seed", seed, "Task seed");
  app.add_option("--classes", spec.classes, "Number of classes (2-8)");
  app.add_option("--vocab", spec.vocab_size, "Vocabulary size");
  app.add_option("--dim", spec.dim, "Embedding dimension");
  app.add_option("--train-per-class", spec.train_per_class, "Training documents per class");
  app.add_option("--test-per-class", spec.test_per_class, "Test documents per class");
  CLI11_PARSE(app, argc, argv);
  try {
    rosprompt::write_synthetic_task(rosprompt::make_synthetic_task(spec, seed), out);
  } catch (const rosprompt::Error& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  std::cout << "wrote " << out << "/config.json\n";
  return 0;
}
