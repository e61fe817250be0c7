// Train a small (7,4) autoencoder over AWGN and compare it with uncoded and
// Hamming-coded BPSK at a few Eb/N0 points.

#include <cstdio>
#include <memory>

#include "aecomm/aecomm.hpp"

using namespace aecomm;

int main()
{
    TrainConfig tc;
    tc.channel = ChannelMode::AwgnOnly;
    tc.iterations = 3000;
    Rng rng(tc.seed);
    auto model = std::make_shared<const TrainedModel>(train_siso(build_siso_autoencoder(SystemConfig{}, tc), tc, rng));
    std::printf("final training loss %.4f\n", model->final_loss);

    const LinkUnderTest links[] = {
        make_learned_link(model, ChannelMode::AwgnOnly),
        make_conventional_link(LinkKind::ConvSisoUncoded, ChannelMode::AwgnOnly),
        make_conventional_link(LinkKind::ConvSisoHamming, ChannelMode::AwgnOnly, FadingMode::Block,
                               HammingDecodeMode::SoftMl),
    };
    const StopRule stop{200, 2'000'000};
    std::printf("%-24s %8s %12s\n", "link", "Eb/N0", "BER");
    for (const auto& link : links)
        for (double db : {0.0, 3.0, 6.0}) {
            const auto p = monte_carlo_ber(link, db, stop, 42);
            std::printf("%-24s %8.1f %12.3e\n", link.name().c_str(), db, p.ber);
        }
}
