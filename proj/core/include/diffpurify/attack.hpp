#ifndef DIFFPURIFY_ATTACK_HPP
#define DIFFPURIFY_ATTACK_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "diffpurify/mlp.hpp"
#include "diffpurify/state.hpp"

namespace diffpurify {

struct LabeledDataset {
    std::vector<State> samples;
    std::vector<int> labels;
    int num_classes = 0;
};

// Feed-forward softmax classifier over flat states.
class Classifier {
public:
    Classifier() = default;
    Classifier(int in_dim, const std::vector<int>& hidden, int classes, std::uint64_t init_seed);

    int num_classes() const { return net_.out_dim(); }
    int in_dim() const { return net_.in_dim(); }

    State logits(const State& x) const { return net_.forward(x); }
    int predict(const State& x) const;
    double cross_entropy(const State& x, int label) const;

    Mlp& net() { return net_; }
    const Mlp& net() const { return net_; }

    void save(const std::string& path) const;
    static Classifier load(const std::string& path);

private:
    Mlp net_;
};

struct ClassifierTrainConfig {
    int epochs = 150;
    int batch_size = 64;
    double lr = 1e-2;
    std::vector<int> hidden = {32};
    double noise_aug = 0.0;  // optional Gaussian input augmentation during training
    std::uint64_t seed = 1;
};

Classifier train_classifier(const LabeledDataset& data, const ClassifierTrainConfig& cfg);

// Gradient of the cross-entropy loss w.r.t. the input, exact reverse pass.
State classifier_grad(const Classifier& clf, const State& x, int label);

struct AttackSpec {
    double epsilon = 0.1;   // L-infinity budget
    int steps = 40;         // PGD iterations
    double step_size = 0.01;

    void validate() const;
};

// L-infinity PGD: gradient-sign ascent from x_ori with projection onto the
// epsilon box after every step. steps = 1 with step_size >= epsilon is FGSM.
State pgd_attack(const Classifier& clf, const State& x_ori, int label, const AttackSpec& spec);

double accuracy(const Classifier& clf, const std::vector<State>& samples,
                const std::vector<int>& labels);

}  // namespace diffpurify

#endif
