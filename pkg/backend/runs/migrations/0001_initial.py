from django.db import migrations, models
import django.db.models.deletion
import django.utils.timezone


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='RunRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('created_at', models.DateTimeField(db_index=True, default=django.utils.timezone.now)),
                ('subcommand', models.CharField(choices=[('spectrum', 'spectrum'), ('foel', 'foel'), ('liebmattis', 'liebmattis'), ('ssep', 'ssep'), ('droplet', 'droplet'), ('lightcone', 'lightcone'), ('cluster', 'cluster'), ('perturb', 'perturb')], max_length=32)),
                ('config', models.JSONField(blank=True, default=dict)),
                ('versions', models.JSONField(blank=True, default=dict)),
                ('wall_time', models.FloatField(default=0.0)),
                ('exit_code', models.IntegerField(blank=True, null=True)),
                ('output_path', models.CharField(blank=True, max_length=512)),
                ('manifest_path', models.CharField(blank=True, max_length=512)),
                ('error', models.TextField(blank=True)),
            ],
            options={
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['subcommand', 'created_at'], name='runs_runrec_subcomm_5d2c1e_idx')],
            },
        ),
        migrations.CreateModel(
            name='AssertionRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(max_length=128)),
                ('passed', models.BooleanField()),
                ('detail', models.JSONField(blank=True, default=dict)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='assertions', to='runs.runrecord')),
            ],
            options={
                'indexes': [models.Index(fields=['name', 'passed'], name='runs_assert_name_8a41b7_idx')],
            },
        ),
    ]
