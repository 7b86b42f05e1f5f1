from runs.management.base import CampaignCommand


class Command(CampaignCommand):
    help = "Gap and ground degeneracy of a gapped chain under a small translation-invariant perturbation."
    subcommand = "perturb"
    sections = ("model", "perturbation")
