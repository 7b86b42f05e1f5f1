from runs.management.base import CampaignCommand


class Command(CampaignCommand):
    help = "Lieb-Mattis ordering of the antiferromagnet on a bipartite graph."
    subcommand = "liebmattis"
    sections = ("model",)
